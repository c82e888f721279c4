// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "remfpca/core.hpp"
#include "remfpca/error.hpp"
#include "remfpca/experiment.hpp"
#include "remfpca/metrics.hpp"
#include "remfpca/quadrature.hpp"
#include "remfpca/random.hpp"

using namespace remfpca;

namespace {

// tolerances and limits
constexpr double kOracleEigTol = 1e-9;
constexpr double kResolvable = 1e-6;
constexpr double kOracleVecTol = 1e-7;
constexpr double kOracleSeconds = 10.0;
constexpr double kReductionTol = 1e-9;
constexpr double kOrthoTol = 1e-8;
constexpr double kErrLambdaBound = 0.25;
constexpr double kEstimationSeconds = 120.0;
constexpr double kLowNoiseAri = 0.95;
constexpr double kHighNoiseGap = 0.10;
constexpr double kClusteringSeconds = 600.0;
constexpr double kVarianceTol = 1e-6;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::map<int, std::pair<bool, std::string>> results;

void report(int id, bool pass, const std::string& detail) {
    results[id] = {pass, detail};
    std::fprintf(stderr, "[%d done]\n", id);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// largest |B^T (G + D_alpha) B - I| over every fit made here
double worst_ortho = 0.0;
int fits_checked = 0;

void track(const RemfpcaModel& m) {
    const Eigen::MatrixXd b = m.eigvecs.leftCols(m.rank);
    const Eigen::MatrixXd gram = b.transpose() * m.alpha_metric() * b;
    worst_ortho = std::max(worst_ortho, (gram - Eigen::MatrixXd::Identity(m.rank, m.rank)).cwiseAbs().maxCoeff());
    ++fits_checked;
}

MFDataset random_instance(Rng& rng, std::size_t p, int n) {
    std::vector<BasisSystem> bases;
    Eigen::Index total = 0;
    for (std::size_t j = 0; j < p; ++j) {
        const int d = 5 + static_cast<int>(rng.below(8));
        bases.push_back(BasisSystem::bspline(Interval(0.0, 1.0 + j), d));
        total += d;
    }
    Eigen::MatrixXd c(n, total);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.normal();
    return MFDataset(std::move(bases), std::move(c));
}

void criterion_oracle() {
    Rng rng(2024);
    const auto t0 = Clock::now();
    // eig_norm: |d lambda_l| / lambda_1 over the whole rank; eig_rel: |d lambda_l| / lambda_l for
    // eigenvalues resolvable in double precision (lambda_l >= kResolvable * lambda_1)
    double eig_norm = 0.0, eig_rel = 0.0, vec_err = 0.0;
    int compared = 0, unresolved = 0;
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t p = 1 + rng.below(3);
        const int n = 5 + static_cast<int>(rng.below(36));
        const MFDataset d = random_instance(rng, p, n);
        std::vector<double> a(p);
        // log-uniform on [1e-8, 1e2], with an exact zero every fifth instance
        for (double& v : a) v = inst % 5 == 0 ? 0.0 : std::pow(10.0, -8.0 + 10.0 * rng.uniform());
        const AlphaVector alpha(a);
        const Eigen::Index k = std::min<Eigen::Index>(n - 1, d.total_dimension());
        const RemfpcaModel m = fit(d, alpha, k), o = oracle_fit(d, alpha, k);
        track(m);
        track(o);
        const double top = o.eigenvalues[0];
        const Eigen::MatrixXd metric = m.alpha_metric();
        for (Eigen::Index l = 0; l < m.rank; ++l) {
            const double diff = std::abs(m.eigenvalues[l] - o.eigenvalues[l]);
            eig_norm = std::max(eig_norm, diff / top);
            if (o.eigenvalues[l] >= kResolvable * top) {
                eig_rel = std::max(eig_rel, diff / o.eigenvalues[l]);
                ++compared;
            } else {
                ++unresolved;
            }
            // eigenvectors of nearly repeated eigenvalues are not individually determined
            const double gap_lo = l + 1 < m.rank ? o.eigenvalues[l] - o.eigenvalues[l + 1] : o.eigenvalues[l];
            const double gap_hi = l > 0 ? o.eigenvalues[l - 1] - o.eigenvalues[l] : INFINITY;
            if (std::min(gap_lo, gap_hi) < 1e-6 * top) continue;
            const double ip = std::abs(m.eigvecs.col(l).dot(metric * o.eigvecs.col(l)));
            vec_err = std::max(vec_err, std::abs(ip - 1.0));
        }
    }
    const double secs = seconds_since(t0);
    report(1, eig_norm < kOracleEigTol && eig_rel < kOracleEigTol && vec_err < kOracleVecTol && secs < kOracleSeconds,
           fmt("50 instances: max |dl|/l1 %.2e, max |dl|/l on %d eigenvalues >= %.0e*l1 %.2e (<%.0e; %d below); "
               "max ||<b,b'>_a|-1| %.2e (<%.0e); %.2fs (<%.0fs)",
               eig_norm, compared, kResolvable, eig_rel, kOracleEigTol, unresolved, vec_err, kOracleVecTol, secs,
               kOracleSeconds));
}

void criterion_alpha_zero() {
    Rng rng(77);
    double worst = 0.0;
    for (int inst = 0; inst < 30; ++inst) {
        const std::size_t p = 1 + rng.below(3);
        const int n = 8 + static_cast<int>(rng.below(30));
        const MFDataset d = random_instance(rng, p, n);
        const Eigen::Index k = std::min<Eigen::Index>(n - 1, d.total_dimension());
        const RemfpcaModel m = fit(d, AlphaVector::zeros(p), k);
        track(m);
        // plain MFPCA: G^T V G b = lambda G b with Eigen's generalized solver
        const Eigen::MatrixXd g = d.gram();
        const Eigen::MatrixXd v = covariance_v(d);
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(g * v * g, g);
        const Eigen::VectorXd ref = es.eigenvalues().reverse();
        for (Eigen::Index l = 0; l < m.rank; ++l) worst = std::max(worst, std::abs(m.eigenvalues[l] - ref[l]) / ref[l]);
    }
    report(2, worst < kReductionTol, fmt("30 instances: max rel eigenvalue diff vs G-only problem %.2e (<%.0e)", worst, kReductionTol));
}

ExperimentSpec estimation_spec() {
    ExperimentSpec spec;
    spec.scenario = Scenario::Estimation;
    spec.replications = 20;
    spec.sim.n = 100;
    spec.sim.theta = 1.0;
    spec.sim.sigma1 = spec.sim.sigma2 = 0.5;
    spec.sim.rho = 0.4;
    spec.methods = {Method::Mfpca, Method::Remfpca};
    spec.basis.n_basis = 15;
    spec.master_seed = 1;
    return spec;
}

double summary_mean(const ExperimentResult& r, Method m, const std::string& measure, int index) {
    for (const auto& row : r.summary) {
        if (row.method == m && row.measure == measure && row.index == index) return row.mean;
    }
    return NAN;
}

void criterion_estimation() {
    const ExperimentSpec spec = estimation_spec();
    const auto t0 = Clock::now();
    const ExperimentResult r = run_experiment(spec);
    const double secs = seconds_since(t0);
    const double lam_m = summary_mean(r, Method::Mfpca, "err_lambda", 1);
    const double lam_r = summary_mean(r, Method::Remfpca, "err_lambda", 1);
    const double psi_m = summary_mean(r, Method::Mfpca, "err_psi", 1);
    const double psi_r = summary_mean(r, Method::Remfpca, "err_psi", 1);
    const bool pass = r.failures.empty() && lam_m < kErrLambdaBound && lam_r < kErrLambdaBound && psi_r <= psi_m &&
                      secs < kEstimationSeconds;
    report(4, pass,
           fmt("mean Err(lambda1) mfpca %.4f remfpca %.4f (<%.2f); mean Err(psi1) remfpca %.4f <= mfpca %.4f; "
               "alpha (%.0e, %.0e); %zu failures; %.1fs (<%.0fs)",
               lam_m, lam_r, kErrLambdaBound, psi_r, psi_m, r.alphas.at(Method::Remfpca)[0],
               r.alphas.at(Method::Remfpca)[1], r.failures.size(), secs, kEstimationSeconds));
}

void criterion_mrae_monotone() {
    const ExperimentSpec spec = estimation_spec();
    int violations = 0;
    double worst_rise = 0.0;
    for (int rep = 0; rep < spec.replications; ++rep) {
        const Replicate rr = make_replicate(spec, rep);
        const RemfpcaModel m = fit(rr.data, AlphaVector::zeros(2), 8);
        track(m);
        double prev = INFINITY;
        for (int J = 1; J <= 8; ++J) {
            const double e = mrae(rr.data, reconstruct(m, rr.data, J));
            if (e > prev) {
                ++violations;
                worst_rise = std::max(worst_rise, e - prev);
            }
            prev = e;
        }
    }
    report(5, violations == 0, fmt("alpha=0, J=1..8 over %d replications: %d increases (largest %.2e)",
                                   spec.replications, violations, worst_rise));
}

ExperimentSpec clustering_spec(double sigma) {
    ExperimentSpec spec;
    spec.scenario = Scenario::Clustering;
    spec.replications = 20;
    spec.sim.n = 99;
    spec.sim.M = 100;
    spec.sim.theta = 1.25;
    spec.sim.sigma1 = spec.sim.sigma2 = sigma;
    spec.sim.rho = 0.0;
    spec.sim.mean_mode = MeanMode::Clusters;
    spec.methods = {Method::Mfpca, Method::Remfpca};
    spec.basis.n_basis = 51;
    spec.cluster_scores = 3;
    spec.cluster_k = 0;
    spec.master_seed = 1;
    return spec;
}

void criterion_clustering() {
    const auto t0 = Clock::now();
    const ExperimentResult low = run_experiment(clustering_spec(5.0));
    const ExperimentResult high = run_experiment(clustering_spec(15.0));
    const double secs = seconds_since(t0);
    const double lo_m = summary_mean(low, Method::Mfpca, "ari", 0), lo_r = summary_mean(low, Method::Remfpca, "ari", 0);
    const double hi_m = summary_mean(high, Method::Mfpca, "ari", 0), hi_r = summary_mean(high, Method::Remfpca, "ari", 0);
    const double nlo_m = summary_mean(low, Method::Mfpca, "nmi", 0), nlo_r = summary_mean(low, Method::Remfpca, "nmi", 0);
    const double nhi_m = summary_mean(high, Method::Mfpca, "nmi", 0), nhi_r = summary_mean(high, Method::Remfpca, "nmi", 0);
    const bool ari_ok = lo_m >= kLowNoiseAri && lo_r >= kLowNoiseAri && hi_r - hi_m >= kHighNoiseGap;
    const bool nmi_ok = nhi_r > nhi_m;
    const bool pass = ari_ok && nmi_ok && low.failures.empty() && high.failures.empty() && secs < kClusteringSeconds;
    report(6, pass,
           fmt("sigma=5 ARI mfpca %.4f remfpca %.4f (>=%.2f); sigma=15 ARI mfpca %.4f remfpca %.4f gap %.4f (>=%.2f); "
               "NMI sigma=5 %.4f/%.4f sigma=15 %.4f/%.4f; %.0fs (<%.0fs)",
               lo_m, lo_r, kLowNoiseAri, hi_m, hi_r, hi_r - hi_m, kHighNoiseGap, nlo_m, nlo_r, nhi_m, nhi_r, secs,
               kClusteringSeconds));
}

void criterion_consistency() {
    auto mean_err = [](int n) {
        ExperimentSpec spec = estimation_spec();
        spec.sim.n = n;
        double total = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            const Replicate rr = make_replicate(spec, rep);
            const RemfpcaModel m = fit(rr.data, AlphaVector::uniform(2, 1.0 / n), 1);
            track(m);
            total += err_lambda(m.eigenvalues[0], true_eigenvalue(1, spec.sim.theta));
        }
        return total / 20.0;
    };
    const double e50 = mean_err(50), e400 = mean_err(400);
    report(7, e400 < e50, fmt("mean Err(lambda1) n=400 %.4f < n=50 %.4f (alpha=1/n, 20 reps)", e400, e50));
}

double ari_by_pairs(const std::vector<int>& a, const std::vector<int>& b) {
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            n11 += sa && sb;
            n10 += sa && !sb;
            n01 += !sa && sb;
            n00 += !sa && !sb;
        }
    }
    return 2 * (n11 * n00 - n10 * n01) / ((n11 + n10) * (n10 + n00) + (n11 + n01) * (n01 + n00));
}

double exhaustive_pam(const Eigen::MatrixXd& dist, int k) {
    const int n = static_cast<int>(dist.rows());
    double best = INFINITY;
    std::vector<int> pick(k);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == k) {
            double total = 0;
            for (int i = 0; i < n; ++i) {
                double m = INFINITY;
                for (int c : pick) m = std::min(m, dist(i, c));
                total += m;
            }
            best = std::min(best, total);
            return;
        }
        for (int s = start; s < n; ++s) {
            pick[depth] = s;
            rec(s + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

void criterion_metrics() {
    Rng rng(5);
    bool exact = true;
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 4 + static_cast<int>(rng.below(40));
        std::vector<int> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = static_cast<int>(rng.below(4));
            b[i] = static_cast<int>(rng.below(3));
        }
        std::vector<int> relabeled(n);
        for (int i = 0; i < n; ++i) relabeled[i] = 10 - b[i];
        exact &= ari(a, a) == 1.0 && nmi(a, a) == 1.0;
        exact &= ari(a, b) == ari(a, relabeled) && nmi(a, b) == nmi(a, relabeled);
    }
    const std::vector<int> x{0, 0, 1, 1}, y{0, 1, 0, 1};
    const double oracle = ari_by_pairs(x, y);
    const double value = ari(x, y);
    const bool pair_ok = std::abs(value - oracle) < 1e-15;

    double pam_gap = 0.0;
    for (int rep = 0; rep < 60; ++rep) {
        const int n = 3 + static_cast<int>(rng.below(7));
        Eigen::MatrixXd pts(n, 2);
        for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
        const Eigen::MatrixXd dist = euclidean_distances(pts);
        for (int k = 1; k <= std::min(3, n); ++k) {
            pam_gap = std::max(pam_gap, kmedoids(pts, k).objective - exhaustive_pam(dist, k));
        }
    }
    const bool pam_ok = pam_gap <= 1e-12;
    report(8, exact && pair_ok && pam_ok,
           fmt("identity/permutation exact: %s; ARI((0,0,1,1),(0,1,0,1)) = %.6f, pair-counting oracle %.6f "
               "(a target of -1/3 disagrees with pair counting); PAM vs exhaustive max excess %.1e",
               exact ? "yes" : "no", value, oracle, pam_gap));
}

void criterion_determinism() {
    ExperimentSpec est = estimation_spec();
    est.replications = 6;
    est.methods = {Method::Mfpca, Method::Remfpca, Method::MarginalFpca, Method::MarginalRefpca};
    ExperimentSpec clu = clustering_spec(10.0);
    clu.replications = 3;
    clu.basis.n_basis = 15;
    bool same = true;
    for (ExperimentSpec spec : {est, clu}) {
        const std::string a = summary_table(run_experiment(spec)).str();
        const std::string b = summary_table(run_experiment(spec)).str();
        spec.jobs = 2;
        const std::string c = summary_table(run_experiment(spec)).str();
        same &= a == b && a == c;
    }
    report(9, same, same ? "estimation and clustering summary CSVs byte-identical across runs and thread counts"
                         : "summary CSVs differ between runs");
}

// integrated pointwise sample variance by composite Gauss-Legendre quadrature
double integrated_variance(const MFDataset& d, std::size_t j) {
    const auto& basis = d.bases()[j];
    const auto rule = gauss_legendre(20);
    const Interval dom = basis.domain();
    const Eigen::MatrixXd centered = d.coeffs().middleCols(d.block_offsets()[j], basis.dimension()).rowwise() -
                                     d.coeffs().middleCols(d.block_offsets()[j], basis.dimension()).colwise().mean();
    double total = 0.0;
    const int panels = 64;
    for (int p = 0; p < panels; ++p) {
        const double w = dom.width() / panels, a = dom.lower() + w * p;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double t = a + 0.5 * w * (rule.nodes[q] + 1.0);
            const Eigen::VectorXd vals = centered * basis.evaluate(t).transpose();
            total += 0.5 * w * rule.weights[q] * vals.squaredNorm() / (d.n_samples() - 1);
        }
    }
    return total;
}

void criterion_rescaling() {
    SimConfig cfg;
    cfg.n = 80;
    cfg.sigma1 = 0.3;
    cfg.sigma2 = 2.0;
    cfg.seed = 10;
    const SimResult sim = generate(cfg);
    // unequal domains and bases: stretch the second variable's grid to [0, 24]
    GridObservations obs = sim.observations;
    obs.variables[1].grid *= 24.0;
    obs.variables[1].values *= 40.0;
    const MFDataset d = smooth_to_coeffs(obs, {BasisSystem::bspline(Interval(0.0, 1.0), 15),
                                               BasisSystem::fourier(Interval(0.0, 24.0), 11)});
    const MFDataset w = apply_weights(d, rescale_weights(d));
    double worst = 0.0;
    std::string values;
    for (std::size_t j = 0; j < 2; ++j) {
        const double v = integrated_variance(w, j);
        worst = std::max(worst, std::abs(v - 1.0));
        values += fmt("%s%.9f", j ? ", " : "", v);
    }
    report(10, worst < kVarianceTol, fmt("rescaled integrated variances %s (|.-1| < %.0e)", values.c_str(), kVarianceTol));
}

}  // namespace

int main() {
    try {
        criterion_oracle();
        criterion_alpha_zero();
        criterion_estimation();
        criterion_mrae_monotone();
        criterion_clustering();
        criterion_consistency();
        criterion_metrics();
        criterion_determinism();
        criterion_rescaling();
        // every fit made above
        report(3, worst_ortho < kOrthoTol,
               fmt("max |B^T(G+D_a)B - I| over %d fits %.2e (<%.0e)", fits_checked, worst_ortho, kOrthoTol));
    } catch (const Error& e) {
        std::printf("aborted: %s: %s\n", error_code_name(e.code()), e.what());
        return 1;
    }
    int failures = 0;
    for (const auto& [id, r] : results) {
        std::printf("criterion %2d: %s  %s\n", id, r.first ? "PASS" : "FAIL", r.second.c_str());
        failures += !r.first;
    }
    std::printf("%d of %zu criteria failed\n", failures, results.size());
    return failures == 0 ? 0 : 1;
}
