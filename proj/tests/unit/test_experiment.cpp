#include <gtest/gtest.h>

#include <set>

#include "remfpca/error.hpp"
#include "remfpca/experiment.hpp"
#include "support.hpp"

using namespace remfpca;

namespace {

ExperimentSpec small_estimation() {
    ExperimentSpec spec;
    spec.replications = 5;
    spec.sim.n = 40;
    spec.methods = {Method::Mfpca, Method::Remfpca};
    spec.cv.folds = 4;
    spec.cv.grid = {{1e-6, 1e-4, 1e-2}, {1e-6, 1e-4, 1e-2}};
    spec.basis.n_basis = 10;
    spec.master_seed = 3;
    return spec;
}

}  // namespace

TEST(Experiment, EstimationSummaryShape) {
    const ExperimentSpec spec = small_estimation();
    const ExperimentResult r = run_experiment(spec);
    EXPECT_TRUE(r.failures.empty());
    std::set<std::pair<std::string, int>> seen;
    int err_rows = 0;
    for (const auto& row : r.summary) {
        EXPECT_EQ(row.count, 5);
        EXPECT_GE(row.std, 0.0);
        if (row.measure == "err_psi") ++err_rows;
        seen.insert({method_name(row.method), row.index});
    }
    EXPECT_EQ(err_rows, 2 * 8);
    EXPECT_EQ(r.alphas.count(Method::Remfpca), 1u);
    EXPECT_EQ(r.alphas.count(Method::Mfpca), 0u);
    EXPECT_NE(summary_view(spec, r).find("replications: 5, failures: 0"), std::string::npos);
}

TEST(Experiment, DeterministicAndThreadIndependent) {
    ExperimentSpec spec = small_estimation();
    spec.replications = 4;
    const std::string a = summary_table(run_experiment(spec)).str();
    EXPECT_EQ(a, summary_table(run_experiment(spec)).str());
    spec.jobs = 3;
    const ExperimentResult threaded = run_experiment(spec);
    EXPECT_EQ(a, summary_table(threaded).str());
    spec.master_seed = 4;
    EXPECT_NE(a, summary_table(run_experiment(spec)).str());
}

TEST(Experiment, ReplicationSeedsDependOnlyOnIndex) {
    ExperimentSpec spec = small_estimation();
    const auto s2 = replication_seed(spec, 2);
    spec.replications = 50;
    EXPECT_EQ(replication_seed(spec, 2), s2);
    EXPECT_NE(replication_seed(spec, 1), s2);
}

TEST(Experiment, FixedAlphaZeroMatchesMfpca) {
    ExperimentSpec spec = small_estimation();
    spec.replications = 2;
    spec.alpha_policy = AlphaPolicy::Fixed;
    spec.fixed_alpha = {0.0};
    const ExperimentResult r = run_experiment(spec);
    std::map<std::tuple<std::string, int, int>, double> values[2];
    for (const auto& rec : r.records) {
        values[rec.method == Method::Remfpca][{rec.measure, rec.index, rec.replication}] = rec.value;
    }
    EXPECT_EQ(values[0], values[1]);
}

TEST(Experiment, SingleVariableMarginalCombinationIsTheFit) {
    Rng rng(6);
    const MFDataset d = testing_support::random_dataset(rng, {7}, 30);
    const RemfpcaModel m = fit(d, AlphaVector({1e-3}), 4);
    const MarginalEstimate e = combine_marginal({m}, d);
    EXPECT_LT((e.eigenvalues - m.eigenvalues).cwiseAbs().maxCoeff(), 1e-14);
    const Eigen::MatrixXd h = h_normalized_eigvecs(m);
    for (int l = 0; l < 4; ++l) {
        const double agree = std::min((e.eigvecs.col(l) - h.col(l)).norm(), (e.eigvecs.col(l) + h.col(l)).norm());
        EXPECT_LT(agree, 1e-12);
    }
}

TEST(Experiment, ClusteringRecords) {
    ExperimentSpec spec;
    spec.scenario = Scenario::Clustering;
    spec.replications = 2;
    spec.sim.n = 30;
    spec.sim.mean_mode = MeanMode::Clusters;
    spec.sim.sigma1 = spec.sim.sigma2 = 1.0;
    spec.methods = {Method::Mfpca, Method::MarginalFpca};
    spec.basis.n_basis = 10;
    const ExperimentResult r = run_experiment(spec);
    EXPECT_TRUE(r.failures.empty());
    std::set<std::string> measures;
    for (const auto& rec : r.records) {
        measures.insert(rec.measure);
        if (rec.measure == "ari" || rec.measure == "nmi") EXPECT_LE(rec.value, 1.0 + 1e-12);
        if (rec.measure == "k") EXPECT_EQ(rec.value, 3.0);
    }
    EXPECT_EQ(measures, (std::set<std::string>{"ari", "nmi", "k"}));
}

TEST(Experiment, SpecJsonRoundTripAndErrors) {
    const ExperimentSpec spec = small_estimation();
    const nlohmann::json j = experiment_spec_to_json(spec);
    EXPECT_EQ(experiment_spec_to_json(experiment_spec_from_json(j)), j);
    nlohmann::json bad = j;
    bad["methods"] = {"pca"};
    EXPECT_THROW(experiment_spec_from_json(bad), Error);
    bad = j;
    bad["replications"] = 0;
    EXPECT_THROW(experiment_spec_from_json(bad), Error);
    EXPECT_THROW(method_from_name("remfpca2"), Error);
    EXPECT_EQ(method_from_name(method_name(Method::MarginalRefpca)), Method::MarginalRefpca);
}
