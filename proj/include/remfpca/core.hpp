#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "remfpca/fundata.hpp"

namespace remfpca {

/// Nonnegative smoothing parameters, one per variable. All zeros gives the
/// unpenalized multivariate FPCA.
class AlphaVector {
public:
    AlphaVector() = default;
    explicit AlphaVector(std::vector<double> values);
    static AlphaVector zeros(std::size_t p) { return AlphaVector(std::vector<double>(p, 0.0)); }
    static AlphaVector uniform(std::size_t p, double value) { return AlphaVector(std::vector<double>(p, value)); }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t j) const { return values_.at(j); }
    const std::vector<double>& values() const noexcept { return values_; }
    std::span<const double> span() const noexcept { return values_; }

    friend bool operator==(const AlphaVector&, const AlphaVector&) = default;
    /// Lexicographic order, used for deterministic tie-breaking.
    friend auto operator<=>(const AlphaVector& a, const AlphaVector& b) { return a.values_ <=> b.values_; }

private:
    std::vector<double> values_;
};

/// Fitted regularized multivariate FPCA.
struct RemfpcaModel {
    std::vector<BasisSystem> bases;
    std::vector<std::string> names;
    AlphaVector alpha;
    Eigen::VectorXd mean;         ///< training mean of the coefficient rows
    Eigen::VectorXd eigenvalues;  ///< decreasing, nonnegative, length k
    Eigen::MatrixXd eigvecs;      ///< (sum d_j) x k, column l is b^(l)
    std::optional<Eigen::VectorXd> weights;
    Eigen::Index fitted_n = 0;
    /// Number of eigenvalues above the clamp threshold.
    Eigen::Index rank = 0;

    Eigen::Index n_components() const noexcept { return eigenvalues.size(); }
    Eigen::Index total_dimension() const noexcept { return mean.size(); }
    Eigen::Index block_offset(std::size_t j) const;
    Eigen::Index block_dimension(std::size_t j) const { return bases.at(j).dimension(); }

    /// Block-diagonal Gram matrix G of the model bases.
    Eigen::MatrixXd gram() const { return block_gram(bases); }
    /// G + D_alpha.
    Eigen::MatrixXd alpha_metric() const;
};

/// Relative threshold below which eigenvalues are clamped to zero.
inline constexpr double kEigenvalueClamp = 1e-12;

/// Solves G^T V G b = lambda (G + D_alpha) b through the Cholesky whitening
/// LL^T = G + D_alpha: eigenvectors u of L^{-1} G^T V G L^{-T} give
/// b = L^{-T} u, which is alpha-orthonormal.
RemfpcaModel fit(const MFDataset& data, const AlphaVector& alpha, Eigen::Index k);

/// Independent route for the same generalized eigenproblem: whitening by the
/// symmetric inverse square root of G + D_alpha from its eigendecomposition.
RemfpcaModel oracle_fit(const MFDataset& data, const AlphaVector& alpha, Eigen::Index k);

/// Entry (i, l) = (c_i - mean)^T G b^(l), always against the training mean.
Eigen::MatrixXd scores(const RemfpcaModel& model, const MFDataset& data);

/// Coefficient rows mean + sum_{m <= J} score_{i,m} b^(m).
MFDataset reconstruct(const RemfpcaModel& model, const MFDataset& data, Eigen::Index J);

/// One (len(points_j) x k) matrix per variable with the PC components
/// evaluated on the given points. With `h_normalized`, every PC is divided
/// by its H-norm sqrt(b^T G b) first.
std::vector<Eigen::MatrixXd> eval_pcs(const RemfpcaModel& model, const std::vector<std::vector<double>>& points,
                                      bool h_normalized = false);

/// Columns of the eigenvector matrix divided by their H-norms.
Eigen::MatrixXd h_normalized_eigvecs(const RemfpcaModel& model);

/// Flips b so that the largest-magnitude entry of G b is positive (first
/// index wins ties).
void apply_sign_rule(Eigen::MatrixXd& eigvecs, const Eigen::MatrixXd& gram);

void to_json(nlohmann::json& j, const RemfpcaModel& model);
RemfpcaModel model_from_json(const nlohmann::json& j);

inline constexpr int kModelFormatVersion = 1;

}  // namespace remfpca
