#include "remfpca/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "remfpca/error.hpp"

namespace remfpca {

AlphaVector::AlphaVector(std::vector<double> values) : values_(std::move(values)) {
    for (double a : values_) {
        if (!std::isfinite(a) || a < 0.0) {
            throw Error(ErrorCode::InvalidConfig, "smoothing parameters must be finite and nonnegative");
        }
    }
}

Eigen::Index RemfpcaModel::block_offset(std::size_t j) const {
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < j; ++i) off += bases.at(i).dimension();
    return off;
}

Eigen::MatrixXd RemfpcaModel::alpha_metric() const { return block_gram(bases) + block_penalty(bases, alpha.span()); }

void apply_sign_rule(Eigen::MatrixXd& eigvecs, const Eigen::MatrixXd& gram) {
    const Eigen::MatrixXd gb = gram * eigvecs;
    for (Eigen::Index l = 0; l < eigvecs.cols(); ++l) {
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < gb.rows(); ++r) {
            if (std::abs(gb(r, l)) > std::abs(gb(best, l))) best = r;
        }
        if (gb(best, l) < 0.0) eigvecs.col(l) *= -1.0;
    }
}

namespace {

struct Prepared {
    Eigen::VectorXd mean;
    Eigen::MatrixXd gram;
    Eigen::MatrixXd metric;  // G + D_alpha
    Eigen::MatrixXd whitened_scores;  // centered B G / sqrt(n - 1), so G^T V G = W^T W
};

Prepared prepare(const MFDataset& data, const AlphaVector& alpha, Eigen::Index k) {
    if (alpha.size() != data.n_variables()) {
        throw Error(ErrorCode::DimensionMismatch, "alpha has " + std::to_string(alpha.size()) +
                                                      " entries but the dataset has " +
                                                      std::to_string(data.n_variables()) + " variables");
    }
    const Eigen::Index n = data.n_samples();
    if (n < 2) throw Error(ErrorCode::InsufficientSamples, "fitting needs at least two samples");
    const Eigen::Index k_max = std::min(n, data.total_dimension());
    if (k < 1 || k > k_max) {
        throw Error(ErrorCode::InvalidK, "number of components k=" + std::to_string(k) + " outside [1, " +
                                             std::to_string(k_max) + "]");
    }
    Prepared p;
    auto centered = center(data);
    p.mean = std::move(centered.mean);
    p.gram = data.gram();
    p.metric = p.gram + data.penalty(alpha.span());
    p.whitened_scores = centered.data.coeffs() * p.gram / std::sqrt(static_cast<double>(n - 1));
    return p;
}

double jitter_for(const Eigen::MatrixXd& metric) { return 1e-10 * metric.trace() / metric.rows(); }

// Eigenpairs of a symmetric matrix, largest first.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> descending_eigen(const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::Factorization, "symmetric eigensolver did not converge");
    return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

RemfpcaModel assemble(const MFDataset& data, const AlphaVector& alpha, Prepared prepared, Eigen::VectorXd values,
                      Eigen::MatrixXd vectors) {
    RemfpcaModel model;
    model.bases = data.bases();
    model.names = data.names();
    model.alpha = alpha;
    model.mean = std::move(prepared.mean);
    model.fitted_n = data.n_samples();

    const double top = values.size() > 0 ? std::max(values[0], 0.0) : 0.0;
    model.rank = 0;
    for (Eigen::Index l = 0; l < values.size(); ++l) {
        if (top > 0.0 && values[l] > kEigenvalueClamp * top) {
            ++model.rank;
        } else {
            values[l] = 0.0;
        }
    }
    apply_sign_rule(vectors, prepared.gram);
    model.eigenvalues = std::move(values);
    model.eigvecs = std::move(vectors);
    return model;
}

}  // namespace

RemfpcaModel fit(const MFDataset& data, const AlphaVector& alpha, Eigen::Index k) {
    Prepared prepared = prepare(data, alpha, k);

    Eigen::LLT<Eigen::MatrixXd> llt(prepared.metric);
    if (llt.info() != Eigen::Success) {
        const Eigen::Index dim = prepared.metric.rows();
        llt.compute(prepared.metric + jitter_for(prepared.metric) * Eigen::MatrixXd::Identity(dim, dim));
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorCode::Factorization, "G + D_alpha is not positive definite");
        }
    }
    // S G^T V G S^T with S = L^{-1}, formed as Z Z^T where Z = L^{-1} W^T.
    const Eigen::MatrixXd z = llt.matrixL().solve(prepared.whitened_scores.transpose());
    auto [values, u] = descending_eigen(z * z.transpose());

    Eigen::VectorXd top_values = values.head(k);
    Eigen::MatrixXd b = llt.matrixU().solve(u.leftCols(k));  // b = S^T u
    return assemble(data, alpha, std::move(prepared), std::move(top_values), std::move(b));
}

RemfpcaModel oracle_fit(const MFDataset& data, const AlphaVector& alpha, Eigen::Index k) {
    Prepared prepared = prepare(data, alpha, k);
    const Eigen::MatrixXd v = covariance_v(data);
    const Eigen::MatrixXd lhs = prepared.gram.transpose() * v * prepared.gram;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> metric_es(prepared.metric);
    Eigen::VectorXd metric_values = metric_es.eigenvalues();
    if (metric_es.info() != Eigen::Success || metric_values.minCoeff() <= 0.0) {
        metric_values.array() += jitter_for(prepared.metric);
        if (metric_values.minCoeff() <= 0.0) throw Error(ErrorCode::Factorization, "G + D_alpha is not positive definite");
    }
    const Eigen::MatrixXd& q = metric_es.eigenvectors();
    const Eigen::MatrixXd inv_sqrt = q * metric_values.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();

    auto [values, u] = descending_eigen(inv_sqrt * lhs * inv_sqrt);
    Eigen::VectorXd top_values = values.head(k);
    Eigen::MatrixXd b = inv_sqrt * u.leftCols(k);
    for (Eigen::Index l = 0; l < k; ++l) {
        b.col(l) /= std::sqrt(b.col(l).dot(prepared.metric * b.col(l)));
    }
    return assemble(data, alpha, std::move(prepared), std::move(top_values), std::move(b));
}

Eigen::MatrixXd scores(const RemfpcaModel& model, const MFDataset& data) {
    bool same = model.bases.size() == data.n_variables();
    for (std::size_t j = 0; same && j < model.bases.size(); ++j) same = model.bases[j].same_definition(data.bases()[j]);
    if (!same) throw Error(ErrorCode::DimensionMismatch, "dataset bases differ from the model bases");
    const Eigen::MatrixXd centered = data.coeffs().rowwise() - model.mean.transpose();
    return centered * (model.gram() * model.eigvecs);
}

MFDataset reconstruct(const RemfpcaModel& model, const MFDataset& data, Eigen::Index J) {
    if (J < 1 || J > model.n_components()) {
        throw Error(ErrorCode::InvalidK, "truncation level J=" + std::to_string(J) + " outside [1, " +
                                             std::to_string(model.n_components()) + "]");
    }
    const Eigen::MatrixXd s = scores(model, data);
    Eigen::MatrixXd rows = s.leftCols(J) * model.eigvecs.leftCols(J).transpose();
    rows.rowwise() += model.mean.transpose();
    return data.with_coeffs(std::move(rows));
}

Eigen::MatrixXd h_normalized_eigvecs(const RemfpcaModel& model) {
    const Eigen::MatrixXd g = model.gram();
    Eigen::MatrixXd out = model.eigvecs;
    for (Eigen::Index l = 0; l < out.cols(); ++l) {
        const double norm = std::sqrt(out.col(l).dot(g * out.col(l)));
        if (norm > 0.0) out.col(l) /= norm;
    }
    return out;
}

std::vector<Eigen::MatrixXd> eval_pcs(const RemfpcaModel& model, const std::vector<std::vector<double>>& points,
                                      bool h_normalized) {
    if (points.size() != model.bases.size()) {
        throw Error(ErrorCode::DimensionMismatch, "one point set per variable required");
    }
    const Eigen::MatrixXd b = h_normalized ? h_normalized_eigvecs(model) : model.eigvecs;
    std::vector<Eigen::MatrixXd> out;
    out.reserve(points.size());
    Eigen::Index offset = 0;
    for (std::size_t j = 0; j < points.size(); ++j) {
        const auto d = model.bases[j].dimension();
        out.push_back(model.bases[j].evaluate(points[j]) * b.middleRows(offset, d));
        offset += d;
    }
    return out;
}

namespace {

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const nlohmann::json& j) {
    const auto raw = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

}  // namespace

void to_json(nlohmann::json& j, const RemfpcaModel& model) {
    j["format_version"] = kModelFormatVersion;
    j["names"] = model.names;
    j["alpha"] = model.alpha.values();
    nlohmann::json bases = nlohmann::json::array();
    for (const auto& b : model.bases) bases.push_back(b);
    j["bases"] = std::move(bases);
    j["mean"] = vector_json(model.mean);
    j["eigenvalues"] = vector_json(model.eigenvalues);
    std::vector<double> row_major;
    row_major.reserve(model.eigvecs.size());
    for (Eigen::Index r = 0; r < model.eigvecs.rows(); ++r) {
        for (Eigen::Index c = 0; c < model.eigvecs.cols(); ++c) row_major.push_back(model.eigvecs(r, c));
    }
    j["eigvecs"] = {{"rows", model.eigvecs.rows()}, {"cols", model.eigvecs.cols()}, {"data", row_major}};
    j["weights"] = model.weights ? vector_json(*model.weights) : nlohmann::json(nullptr);
    j["fitted_n"] = model.fitted_n;
    j["rank"] = model.rank;
}

RemfpcaModel model_from_json(const nlohmann::json& j) {
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw Error(ErrorCode::Parse, "unsupported model format version " + std::to_string(version));
        }
        RemfpcaModel model;
        for (const auto& b : j.at("bases")) model.bases.push_back(basis_from_json(b));
        model.names = j.at("names").get<std::vector<std::string>>();
        model.alpha = AlphaVector(j.at("alpha").get<std::vector<double>>());
        model.mean = vector_from(j.at("mean"));
        model.eigenvalues = vector_from(j.at("eigenvalues"));
        const auto& ev = j.at("eigvecs");
        const auto rows = ev.at("rows").get<Eigen::Index>();
        const auto cols = ev.at("cols").get<Eigen::Index>();
        const auto data = ev.at("data").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
            throw Error(ErrorCode::Parse, "eigenvector matrix size does not match its dimensions");
        }
        model.eigvecs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            data.data(), rows, cols);
        if (!j.at("weights").is_null()) model.weights = vector_from(j.at("weights"));
        model.fitted_n = j.at("fitted_n").get<Eigen::Index>();
        model.rank = j.at("rank").get<Eigen::Index>();

        Eigen::Index total = 0;
        for (const auto& b : model.bases) total += b.dimension();
        if (model.mean.size() != total || rows != total || cols != model.eigenvalues.size() ||
            model.alpha.size() != model.bases.size()) {
            throw Error(ErrorCode::Parse, "model fields have inconsistent dimensions");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed model file: ") + e.what());
    }
}

}  // namespace remfpca
