#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "remfpca/core.hpp"

namespace remfpca {

/// |estimate - truth| / |truth|.
double err_lambda(double estimate, double truth);

/// One callable per variable giving the true function component.
using MultiFunction = std::vector<std::function<double(double)>>;

/// H-norm distance between the H-normalized estimate (coefficients `b` over
/// `bases`) and the true function, after choosing the sign s in {-1, +1}
/// that minimizes it. Integrals use composite Gauss-Legendre quadrature.
double err_psi(const Eigen::VectorXd& b, const std::vector<BasisSystem>& bases, const MultiFunction& truth);

/// (1/n) sum_i ||xhat_i - x_i||_H / ||x_i||_H with the norms computed in
/// coefficient space as sqrt(delta^T G delta).
double mrae(const MFDataset& data, const MFDataset& reconstructed);

/// Per-sample relative errors behind mrae().
Eigen::VectorXd relative_errors(const MFDataset& data, const MFDataset& reconstructed);

struct ClusterEval {
    std::vector<int> labels;
    std::vector<Eigen::Index> medoid_indices;
    double objective = 0.0;  ///< sum of distances to the assigned medoid
    int swaps = 0;
    std::vector<double> objective_trace;  ///< objective after BUILD and after each swap
    Eigen::VectorXd silhouette_values;     ///< empty when k == 1
    double silhouette_mean = 0.0;
    std::optional<double> ari;
    std::optional<double> nmi;
};

Eigen::MatrixXd euclidean_distances(const Eigen::MatrixXd& points);

/// PAM (deterministic BUILD then steepest-descent SWAP until no swap lowers
/// the objective) on Euclidean distances between rows of `points`. The seed
/// is accepted for interface stability; BUILD and SWAP are deterministic and
/// ties go to the lowest index. When at most 1000 medoid subsets exist, the
/// SWAP result is replaced by the best subset if that one is strictly better.
ClusterEval kmedoids(const Eigen::MatrixXd& points, int k, std::uint64_t seed = 0);

struct Silhouette {
    Eigen::VectorXd values;
    double mean = 0.0;
};

/// Standard silhouette on Euclidean distances. Members of singleton clusters
/// score 0, as do points with a(i) = b(i) = 0.
Silhouette silhouette(const Eigen::MatrixXd& points, std::span<const int> labels);

/// Adjusted Rand index (Hubert-Arabie permutation model).
double ari(std::span<const int> a, std::span<const int> b);

/// Mutual information normalized by the arithmetic mean of the entropies.
double nmi(std::span<const int> a, std::span<const int> b);

/// Number of clusters in `k_range` maximizing the mean silhouette of the
/// kmedoids partition; the smallest k wins ties.
int choose_k_by_silhouette(const Eigen::MatrixXd& points, std::span<const int> k_range, std::uint64_t seed = 0,
                           std::vector<double>* mean_silhouettes = nullptr);

}  // namespace remfpca
