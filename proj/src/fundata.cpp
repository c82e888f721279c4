#include "remfpca/fundata.hpp"

#include <cmath>

#include "remfpca/error.hpp"

namespace remfpca {

void GridObservations::validate() const {
    if (variables.empty()) throw Error(ErrorCode::InvalidConfig, "observations contain no variables");
    const Eigen::Index n = variables.front().values.rows();
    for (const auto& var : variables) {
        if (var.values.rows() != n) {
            throw Error(ErrorCode::DimensionMismatch, "variable '" + var.name + "' has a different sample count");
        }
        if (var.values.cols() != var.grid.size()) {
            throw Error(ErrorCode::DimensionMismatch, "variable '" + var.name + "' grid and value widths differ");
        }
        for (Eigen::Index k = 1; k < var.grid.size(); ++k) {
            if (!(var.grid[k] > var.grid[k - 1])) {
                throw Error(ErrorCode::InvalidConfig, "grid of variable '" + var.name + "' is not strictly increasing");
            }
        }
        if (!var.values.allFinite()) {
            throw Error(ErrorCode::InvalidConfig, "variable '" + var.name + "' contains missing or non-finite values");
        }
    }
    if (!sample_ids.empty() && static_cast<Eigen::Index>(sample_ids.size()) != n) {
        throw Error(ErrorCode::DimensionMismatch, "sample id count differs from the number of samples");
    }
}

MFDataset::MFDataset(std::vector<BasisSystem> bases, Eigen::MatrixXd coeffs, std::vector<std::string> names)
    : bases_(std::move(bases)), coeffs_(std::move(coeffs)), names_(std::move(names)) {
    if (bases_.empty()) throw Error(ErrorCode::InvalidConfig, "dataset needs at least one variable");
    offsets_.reserve(bases_.size() + 1);
    offsets_.push_back(0);
    for (const auto& b : bases_) offsets_.push_back(offsets_.back() + b.dimension());
    if (coeffs_.cols() != offsets_.back()) {
        throw Error(ErrorCode::DimensionMismatch, "coefficient matrix has " + std::to_string(coeffs_.cols()) +
                                                      " columns but the bases span " +
                                                      std::to_string(offsets_.back()));
    }
    if (names_.empty()) {
        for (std::size_t j = 0; j < bases_.size(); ++j) names_.push_back("x" + std::to_string(j + 1));
    }
    if (names_.size() != bases_.size()) throw Error(ErrorCode::DimensionMismatch, "one name per variable required");
}

void MFDataset::set_labels(std::vector<int> labels) {
    if (static_cast<Eigen::Index>(labels.size()) != n_samples()) {
        throw Error(ErrorCode::DimensionMismatch, "label count differs from the number of samples");
    }
    labels_ = std::move(labels);
}

MFDataset MFDataset::with_coeffs(Eigen::MatrixXd coeffs) const {
    MFDataset out(bases_, std::move(coeffs), names_);
    if (labels_ && static_cast<Eigen::Index>(labels_->size()) == out.n_samples()) out.labels_ = labels_;
    return out;
}

MFDataset MFDataset::select_rows(std::span<const Eigen::Index> rows) const {
    Eigen::MatrixXd sub(rows.size(), coeffs_.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) sub.row(r) = coeffs_.row(rows[r]);
    MFDataset out(bases_, std::move(sub), names_);
    if (labels_) {
        std::vector<int> sub_labels;
        for (auto r : rows) sub_labels.push_back((*labels_)[r]);
        out.labels_ = std::move(sub_labels);
    }
    return out;
}

MFDataset MFDataset::variable(std::size_t j) const {
    MFDataset out({bases_.at(j)}, Eigen::MatrixXd(block(j)), {names_.at(j)});
    out.labels_ = labels_;
    return out;
}

bool MFDataset::same_bases(const MFDataset& other) const noexcept {
    if (bases_.size() != other.bases_.size()) return false;
    for (std::size_t j = 0; j < bases_.size(); ++j) {
        if (!bases_[j].same_definition(other.bases_[j])) return false;
    }
    return true;
}

MFDataset smooth_to_coeffs(const GridObservations& obs, const std::vector<BasisSystem>& bases) {
    obs.validate();
    if (obs.n_variables() != bases.size()) {
        throw Error(ErrorCode::DimensionMismatch, "observations have " + std::to_string(obs.n_variables()) +
                                                      " variables but " + std::to_string(bases.size()) +
                                                      " bases were declared");
    }
    const Eigen::Index n = obs.n_samples();
    Eigen::Index total = 0;
    for (const auto& b : bases) total += b.dimension();
    Eigen::MatrixXd coeffs(n, total);
    std::vector<std::string> names;

    Eigen::Index offset = 0;
    for (std::size_t j = 0; j < bases.size(); ++j) {
        const auto& var = obs.variables[j];
        const auto& basis = bases[j];
        names.push_back(var.name);
        const Eigen::Index d = basis.dimension();
        if (var.grid.size() < d) {
            throw Error(ErrorCode::Underdetermined, "variable '" + var.name + "' has " +
                                                        std::to_string(var.grid.size()) +
                                                        " grid points but its basis has dimension " +
                                                        std::to_string(d));
        }
        const Eigen::MatrixXd design =
            basis.evaluate(std::span<const double>(var.grid.data(), static_cast<std::size_t>(var.grid.size())));
        // One factorization per variable serves every sample.
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        if (qr.rank() < d) {
            throw Error(ErrorCode::RankDeficient, "design matrix of variable '" + var.name + "' has rank " +
                                                      std::to_string(qr.rank()) + " < " + std::to_string(d));
        }
        coeffs.middleCols(offset, d) = qr.solve(var.values.transpose()).transpose();
        offset += d;
    }
    return MFDataset(bases, std::move(coeffs), std::move(names));
}

Centered center(const MFDataset& data) {
    const Eigen::VectorXd mean = data.coeffs().colwise().mean().transpose();
    Eigen::MatrixXd centered = data.coeffs().rowwise() - mean.transpose();
    return {data.with_coeffs(std::move(centered)), mean};
}

double inner_h(const MFDataset& data, Eigen::Index sample, const Eigen::VectorXd& b) {
    if (b.size() != data.total_dimension()) {
        throw Error(ErrorCode::DimensionMismatch, "coefficient vector length " + std::to_string(b.size()) +
                                                      " differs from dataset dimension " +
                                                      std::to_string(data.total_dimension()));
    }
    if (sample < 0 || sample >= data.n_samples()) throw Error(ErrorCode::DimensionMismatch, "sample index out of range");
    double total = 0.0;
    for (std::size_t j = 0; j < data.n_variables(); ++j) {
        const auto off = data.block_offset(j);
        const auto d = data.block_dimension(j);
        total += data.coeffs().row(sample).segment(off, d).transpose().dot(data.bases()[j].gram() * b.segment(off, d));
    }
    return total;
}

Eigen::MatrixXd covariance_v(const MFDataset& data) {
    const Eigen::Index n = data.n_samples();
    if (n < 2) throw Error(ErrorCode::InsufficientSamples, "covariance needs at least two samples");
    const Eigen::MatrixXd centered = data.coeffs().rowwise() - data.coeffs().colwise().mean();
    Eigen::MatrixXd v = centered.transpose() * centered / static_cast<double>(n - 1);
    return 0.5 * (v + v.transpose());
}

Eigen::VectorXd rescale_weights(const MFDataset& data) {
    const Eigen::MatrixXd v = covariance_v(data);
    Eigen::VectorXd w(data.n_variables());
    for (std::size_t j = 0; j < data.n_variables(); ++j) {
        const auto off = data.block_offset(j);
        const auto d = data.block_dimension(j);
        // integral of Var(X_j(t)) dt = trace(V_jj G_j)
        const double integrated = (v.block(off, off, d, d) * data.bases()[j].gram()).trace();
        if (!(integrated > 0.0) || !std::isfinite(integrated)) {
            throw Error(ErrorCode::DegenerateVariable,
                        "variable '" + data.names()[j] + "' has zero integrated variance");
        }
        w[j] = 1.0 / integrated;
    }
    return w;
}

MFDataset apply_weights(const MFDataset& data, const Eigen::VectorXd& weights) {
    if (weights.size() != static_cast<Eigen::Index>(data.n_variables())) {
        throw Error(ErrorCode::DimensionMismatch, "one weight per variable required");
    }
    Eigen::MatrixXd scaled = data.coeffs();
    for (std::size_t j = 0; j < data.n_variables(); ++j) {
        scaled.middleCols(data.block_offset(j), data.block_dimension(j)) *= std::sqrt(weights[j]);
    }
    return data.with_coeffs(std::move(scaled));
}

Eigen::MatrixXd evaluate_variable(const MFDataset& data, std::size_t j, std::span<const double> points) {
    return data.block(j) * data.bases().at(j).evaluate(points).transpose();
}

}  // namespace remfpca
