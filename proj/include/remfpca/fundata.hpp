#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "remfpca/basis.hpp"

namespace remfpca {

/// Discrete observations of one variable: all samples share the grid.
struct GridVariable {
    std::string name;
    Eigen::VectorXd grid;    ///< K strictly increasing points
    Eigen::MatrixXd values;  ///< n x K
};

/// Noisy grid observations Y_{i,j,k} for p variables and n samples.
struct GridObservations {
    std::vector<GridVariable> variables;
    std::vector<std::string> sample_ids;  ///< optional, defaults to 0..n-1

    Eigen::Index n_samples() const { return variables.empty() ? 0 : variables.front().values.rows(); }
    std::size_t n_variables() const { return variables.size(); }
    /// Throws if the grids are not strictly increasing or the sample counts differ.
    void validate() const;
};

/// n multivariate functional samples stored as basis coefficients. Row i is
/// the concatenation of the per-variable coefficient blocks of sample i.
class MFDataset {
public:
    MFDataset(std::vector<BasisSystem> bases, Eigen::MatrixXd coeffs, std::vector<std::string> names = {});

    Eigen::Index n_samples() const noexcept { return coeffs_.rows(); }
    std::size_t n_variables() const noexcept { return bases_.size(); }
    Eigen::Index total_dimension() const noexcept { return coeffs_.cols(); }

    const std::vector<BasisSystem>& bases() const noexcept { return bases_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const Eigen::MatrixXd& coeffs() const noexcept { return coeffs_; }
    /// Offsets of each variable's block; size p + 1, last entry = total dimension.
    const std::vector<Eigen::Index>& block_offsets() const noexcept { return offsets_; }

    Eigen::Index block_offset(std::size_t j) const { return offsets_.at(j); }
    Eigen::Index block_dimension(std::size_t j) const { return offsets_.at(j + 1) - offsets_.at(j); }
    auto block(std::size_t j) const { return coeffs_.middleCols(block_offset(j), block_dimension(j)); }

    const std::optional<std::vector<int>>& labels() const noexcept { return labels_; }
    void set_labels(std::vector<int> labels);

    /// Block-diagonal Gram matrix G.
    Eigen::MatrixXd gram() const { return block_gram(bases_); }
    /// blockdiag(alpha_j * D_j).
    Eigen::MatrixXd penalty(std::span<const double> alpha) const { return block_penalty(bases_, alpha); }

    /// Dataset with the same bases and new coefficient rows.
    MFDataset with_coeffs(Eigen::MatrixXd coeffs) const;
    /// Subset of samples, in the order given.
    MFDataset select_rows(std::span<const Eigen::Index> rows) const;
    /// Single-variable dataset holding block j.
    MFDataset variable(std::size_t j) const;

    /// True when both datasets use identical basis definitions in the same order.
    bool same_bases(const MFDataset& other) const noexcept;

private:
    std::vector<BasisSystem> bases_;
    Eigen::MatrixXd coeffs_;
    std::vector<std::string> names_;
    std::vector<Eigen::Index> offsets_;
    std::optional<std::vector<int>> labels_;
};

/// Per-sample, per-variable least-squares projection onto the bases.
MFDataset smooth_to_coeffs(const GridObservations& obs, const std::vector<BasisSystem>& bases);

struct Centered {
    MFDataset data;
    Eigen::VectorXd mean;
};

/// Subtracts the column means of the coefficient matrix.
Centered center(const MFDataset& data);

/// <x_i, psi>_H = c_i^T G b.
double inner_h(const MFDataset& data, Eigen::Index sample, const Eigen::VectorXd& b);

/// V = B^T (I - J/n) B / (n - 1).
Eigen::MatrixXd covariance_v(const MFDataset& data);

/// w_j = 1 / integral of the pointwise sample variance of variable j.
Eigen::VectorXd rescale_weights(const MFDataset& data);

/// Scales block j by sqrt(w_j).
MFDataset apply_weights(const MFDataset& data, const Eigen::VectorXd& weights);

/// Evaluates every sample of variable j at the given points (n x len).
Eigen::MatrixXd evaluate_variable(const MFDataset& data, std::size_t j, std::span<const double> points);

}  // namespace remfpca
