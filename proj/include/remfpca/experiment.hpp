#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "remfpca/io.hpp"
#include "remfpca/simulate.hpp"
#include "remfpca/tuning.hpp"

namespace remfpca {

enum class Scenario { Estimation, Clustering };

enum class Method {
    Mfpca,           ///< multivariate, alpha = 0
    Remfpca,         ///< multivariate, penalized
    MarginalFpca,    ///< one p = 1 fit per variable, alpha = 0
    MarginalRefpca,  ///< one p = 1 fit per variable, penalized
};

std::string method_name(Method m);
Method method_from_name(const std::string& name);

enum class AlphaPolicy {
    Fixed,  ///< the values in ExperimentSpec::fixed_alpha
    Cv,     ///< cross-validated on replication 1 and reused, unless cv_every_rep
};

struct BasisSpec {
    BasisKind kind = BasisKind::BSpline;
    int n_basis = 15;
    int order = 4;

    BasisSystem build(const Interval& domain) const;
};

struct ExperimentSpec {
    Scenario scenario = Scenario::Estimation;
    int replications = 100;
    SimConfig sim;
    std::vector<Method> methods{Method::Mfpca, Method::Remfpca, Method::MarginalFpca, Method::MarginalRefpca};
    AlphaPolicy alpha_policy = AlphaPolicy::Cv;
    /// One value (shared) or one per variable.
    std::vector<double> fixed_alpha;
    CvConfig cv;  ///< grid left empty means the default grid
    bool cv_every_rep = false;
    BasisSpec basis;
    /// Estimation: components m = 1..components and truncations J = 1..components.
    int components = 8;
    /// Clustering: leading PC scores per fit used as features.
    int cluster_scores = 3;
    /// Clustering: fixed cluster count, or 0 for the silhouette choice over k_range.
    int cluster_k = 3;
    std::vector<int> k_range{2, 3, 4, 5, 6};
    std::uint64_t master_seed = 1;
    int jobs = 1;

    void validate() const;
};

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);
nlohmann::json experiment_spec_to_json(const ExperimentSpec& spec);

/// One measurement. `index` is m for err_lambda / err_psi, J for mrae and 0
/// for clustering measures (ari, nmi, k).
struct RepRecord {
    int replication = 0;
    Method method = Method::Mfpca;
    std::string measure;
    int index = 0;
    double value = 0.0;
};

struct RepFailure {
    int replication = 0;
    std::string code;
    std::string message;
};

struct SummaryRow {
    Method method = Method::Mfpca;
    std::string measure;
    int index = 0;
    double mean = 0.0;
    double std = 0.0;  ///< sample standard deviation; 0 for a single value
    int count = 0;
};

struct ExperimentResult {
    std::vector<RepRecord> records;  ///< replication-major, then the order of `methods`
    std::vector<RepFailure> failures;
    std::vector<SummaryRow> summary;
    /// Alpha used per penalized method on replication 1 (or the fixed values).
    std::map<Method, AlphaVector> alphas;
    std::string spec_hash;
};

/// Seed of replication r (0-based): derive_seed(master_seed, r).
std::uint64_t replication_seed(const ExperimentSpec& spec, int replication);

/// Simulated, smoothed dataset of one replication plus its truth.
struct Replicate {
    SimConfig config;
    MFDataset data;
    SimTruth truth;
};
Replicate make_replicate(const ExperimentSpec& spec, int replication);

/// Alpha for a penalized method from `spec.alpha_policy` on the given data.
/// Marginal methods tune each variable separately.
AlphaVector choose_alpha(const ExperimentSpec& spec, Method method, const MFDataset& data);

/// All records of one replication; throws on failure.
std::vector<RepRecord> run_replication(const ExperimentSpec& spec, int replication,
                                       const std::map<Method, AlphaVector>& alphas);

using ProgressFn = std::function<void(int done, int total)>;
ExperimentResult run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {});

std::vector<SummaryRow> summarize(const std::vector<RepRecord>& records, const std::vector<Method>& method_order);

io::CsvTable records_table(const ExperimentResult& result);
io::CsvTable summary_table(const ExperimentResult& result);
/// Text table: mean with std in parentheses, one column per method.
std::string summary_view(const ExperimentSpec& spec, const ExperimentResult& result);

/// Combined bivariate-style estimate from per-variable fits: eigenvalue sum
/// and the H-normalized components stacked with weight 1/sqrt(p), the sign of
/// each block after the first matching the sign of its score correlation with
/// block 1.
struct MarginalEstimate {
    Eigen::VectorXd eigenvalues;  ///< k
    Eigen::MatrixXd eigvecs;      ///< (sum d_j) x k, H-normalized
};
MarginalEstimate combine_marginal(const std::vector<RemfpcaModel>& fits, const MFDataset& data);

}  // namespace remfpca
