#include "remfpca/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "remfpca/error.hpp"
#include "remfpca/random.hpp"

namespace remfpca {

void SimConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "simulation config: " + what); };
    if (n < 1) fail("n must be >= 1");
    if (M < 1) fail("M must be >= 1");
    if (!(theta > 0.0) || !std::isfinite(theta)) fail("theta must be > 0");
    if (!(sigma1 >= 0.0) || !(sigma2 >= 0.0)) fail("noise standard deviations must be >= 0");
    if (!(rho > -1.0 && rho < 1.0)) fail("rho must lie in (-1, 1)");
    if (grid1 < 2 || grid2 < 2) fail("grid sizes must be >= 2");
    if (mean_mode == MeanMode::Clusters && n % 3 != 0) fail("clusters mode needs n divisible by 3");
}

double true_eigenvalue(int m, double theta) {
    const double base = 2.0 * theta / ((2.0 * m - 1.0) * std::numbers::pi);
    return base * base;
}

double true_component(int m, int variable, double t) {
    if (variable == 0) return std::sin(m * std::numbers::pi * t);
    return std::sin((2.0 * m - 1.0) * std::numbers::pi * t / 2.0);
}

Eigen::VectorXd true_component(int m, int variable, std::span<const double> points) {
    Eigen::VectorXd out(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) out[k] = true_component(m, variable, points[k]);
    return out;
}

Eigen::VectorXd unit_grid(int size) { return Eigen::VectorXd::LinSpaced(size, 0.0, 1.0); }

SimResult generate(const SimConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    const std::array<int, 2> sizes{cfg.grid1, cfg.grid2};
    const int k_max = std::max(cfg.grid1, cfg.grid2);

    // psi_m evaluated on each grid, M x K_j
    std::array<Eigen::MatrixXd, 2> psi;
    std::array<Eigen::VectorXd, 2> grids;
    for (int j = 0; j < 2; ++j) {
        grids[j] = unit_grid(sizes[j]);
        psi[j].resize(cfg.M, sizes[j]);
        for (int m = 1; m <= cfg.M; ++m) {
            for (int k = 0; k < sizes[j]; ++k) psi[j](m - 1, k) = true_component(m, j, grids[j][k]);
        }
    }

    SimResult result;
    auto& truth = result.truth;
    truth.eigenvalues.resize(cfg.M);
    for (int m = 1; m <= cfg.M; ++m) truth.eigenvalues[m - 1] = true_eigenvalue(m, cfg.theta);
    truth.labels.assign(cfg.n, 0);
    if (cfg.mean_mode == MeanMode::Clusters) {
        const int per_cluster = cfg.n / 3;
        for (int i = 0; i < cfg.n; ++i) truth.labels[i] = i / per_cluster;
    }
    truth.scores.resize(cfg.n, cfg.M);

    // cluster means on each grid, 3 x K_j
    std::array<Eigen::MatrixXd, 2> cluster_means;
    for (int j = 0; j < 2; ++j) {
        cluster_means[j] = Eigen::MatrixXd::Zero(3, sizes[j]);
        if (cfg.mean_mode == MeanMode::Clusters) {
            Eigen::MatrixXd first3 = Eigen::MatrixXd::Zero(3, sizes[j]);
            for (int m = 1; m <= 3; ++m) {
                for (int k = 0; k < sizes[j]; ++k) first3(m - 1, k) = true_component(m, j, grids[j][k]);
            }
            cluster_means[j] = cfg.cluster_matrix.transpose() * first3;
        }
    }

    const double s1 = cfg.sigma1;
    const double s2 = cfg.sigma2;
    const double cross = std::sqrt(1.0 - cfg.rho * cfg.rho);

    std::array<Eigen::MatrixXd, 2> values{Eigen::MatrixXd(cfg.n, sizes[0]), Eigen::MatrixXd(cfg.n, sizes[1])};
    Eigen::RowVectorXd draws(cfg.M);
    for (int i = 0; i < cfg.n; ++i) {
        for (int m = 0; m < cfg.M; ++m) draws[m] = rng.normal() * std::sqrt(truth.eigenvalues[m]);
        truth.scores.row(i) = draws;
        for (int j = 0; j < 2; ++j) {
            values[j].row(i) = draws * psi[j] + cluster_means[j].row(truth.labels[i]);
        }
        for (int k = 0; k < k_max; ++k) {
            const double z1 = rng.normal();
            const double z2 = rng.normal();
            if (k < sizes[0]) values[0](i, k) += s1 * z1;
            if (k < sizes[1]) values[1](i, k) += s2 * (cfg.rho * z1 + cross * z2);
        }
    }

    auto& obs = result.observations;
    obs.variables.push_back({"x1", grids[0], std::move(values[0])});
    obs.variables.push_back({"x2", grids[1], std::move(values[1])});
    for (int i = 0; i < cfg.n; ++i) obs.sample_ids.push_back(std::to_string(i));
    return result;
}

}  // namespace remfpca
