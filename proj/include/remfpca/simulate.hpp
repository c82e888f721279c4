#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "remfpca/fundata.hpp"

namespace remfpca {

enum class MeanMode { Zero, Clusters };

/// Bivariate truncated Karhunen-Loeve generator on [0, 1] x [0, 1]:
///   X_i = sum_{m<=M} rho_{i,m} psi_m,  rho_{i,m} ~ N(0, lambda_m),
///   lambda_m = (2 theta / ((2m - 1) pi))^2,
///   psi_m = (sin(m pi t), sin((2m - 1) pi t / 2)),
///   Y_i(t_k) = mu_i(t_k) + X_i(t_k) + eps_{i,k},
/// with eps_{i,k} bivariate normal (sigma1^2, rho sigma1 sigma2; ., sigma2^2).
struct SimConfig {
    int n = 100;
    int M = 100;
    double theta = 1.0;
    double sigma1 = 0.5;
    double sigma2 = 0.5;
    double rho = 0.4;
    int grid1 = 101;
    int grid2 = 101;
    MeanMode mean_mode = MeanMode::Zero;
    /// Cluster c has mean sum_{m=1..3} A(m, c) psi_m.
    Eigen::Matrix3d cluster_matrix = (Eigen::Matrix3d() << 4, 0, 4, 4, 4, 0, 0, 4, 4).finished();
    std::uint64_t seed = 1;

    void validate() const;
};

struct SimTruth {
    Eigen::VectorXd eigenvalues;  ///< lambda_1..lambda_M
    std::vector<int> labels;      ///< cluster per sample (all zero in Zero mode)
    Eigen::MatrixXd scores;       ///< n x M draws of rho_{i,m}
};

struct SimResult {
    GridObservations observations;
    SimTruth truth;
};

/// Eigenvalue lambda_m of the generating process (m >= 1).
double true_eigenvalue(int m, double theta);

/// psi_m component for variable 0 (sin(m pi t)) or 1 (sin((2m-1) pi t / 2)).
double true_component(int m, int variable, double t);

/// Dense evaluation of true_component on the given points.
Eigen::VectorXd true_component(int m, int variable, std::span<const double> points);

/// Equally spaced grid of `size` points on [0, 1].
Eigen::VectorXd unit_grid(int size);

/// Draw order per sample i: the M scores, then for k = 0..max(K1, K2)-1 a
/// pair (z1, z2) of standard normals turned into (eps1, eps2) by the
/// Cholesky factor of the noise covariance. Grid index k beyond a variable's
/// own grid size is discarded.
SimResult generate(const SimConfig& cfg);

}  // namespace remfpca
