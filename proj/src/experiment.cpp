#include "remfpca/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <thread>

#include "remfpca/error.hpp"
#include "remfpca/metrics.hpp"
#include "remfpca/random.hpp"

namespace remfpca {

using nlohmann::json;

std::string method_name(Method m) {
    switch (m) {
        case Method::Mfpca: return "mfpca";
        case Method::Remfpca: return "remfpca";
        case Method::MarginalFpca: return "marginal_fpca";
        case Method::MarginalRefpca: return "marginal_refpca";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    for (Method m : {Method::Mfpca, Method::Remfpca, Method::MarginalFpca, Method::MarginalRefpca}) {
        if (method_name(m) == name) return m;
    }
    throw Error(ErrorCode::InvalidConfig,
                "unknown method '" + name + "' (expected mfpca, remfpca, marginal_fpca or marginal_refpca)");
}

namespace {

bool penalized(Method m) { return m == Method::Remfpca || m == Method::MarginalRefpca; }
bool marginal(Method m) { return m == Method::MarginalFpca || m == Method::MarginalRefpca; }

const char* kind_name(BasisKind k) {
    switch (k) {
        case BasisKind::BSpline: return "bspline";
        case BasisKind::Fourier: return "fourier";
        case BasisKind::Sine: return "sine";
    }
    return "?";
}

}  // namespace

BasisSystem BasisSpec::build(const Interval& domain) const {
    switch (kind) {
        case BasisKind::BSpline: return BasisSystem::bspline(domain, n_basis, order);
        case BasisKind::Fourier: return BasisSystem::fourier(domain, n_basis);
        case BasisKind::Sine: return BasisSystem::sine(domain, n_basis);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown basis kind");
}

void ExperimentSpec::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "experiment: " + what); };
    if (replications < 1) fail("replications must be >= 1");
    if (methods.empty()) fail("method list is empty");
    if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size()) fail("duplicate methods");
    sim.validate();
    if (alpha_policy == AlphaPolicy::Fixed && fixed_alpha.size() != 1 && fixed_alpha.size() != 2) {
        fail("fixed alpha needs one value or one per variable");
    }
    for (double a : fixed_alpha) {
        if (!(a >= 0.0) || !std::isfinite(a)) fail("alpha values must be finite and >= 0");
    }
    if (jobs < 1) fail("jobs must be >= 1");
    if (scenario == Scenario::Estimation) {
        if (components < 1 || components > std::min(sim.n - 1, basis.n_basis)) {
            fail("components must lie in [1, min(n - 1, n_basis)]");
        }
    } else {
        if (sim.mean_mode != MeanMode::Clusters) fail("clustering scenario needs mean_mode = clusters");
        if (cluster_scores < 1 || cluster_scores > std::min(sim.n - 1, basis.n_basis)) {
            fail("cluster_scores must lie in [1, min(n - 1, n_basis)]");
        }
        if (cluster_k < 0 || cluster_k > sim.n) fail("cluster_k must be 0 (auto) or in [1, n]");
        if (cluster_k == 0) {
            if (k_range.empty()) fail("k_range is empty");
            for (int k : k_range) {
                if (k < 2 || k > sim.n - 1) fail("k_range entries must lie in [2, n - 1]");
            }
        }
    }
}

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw Error(ErrorCode::InvalidConfig, "field '" + field + "': " + what);
}

template <class T>
T field(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        field_error(key, "wrong type");
    }
}

}  // namespace

ExperimentSpec experiment_spec_from_json(const json& j) {
    if (!j.is_object()) field_error("(root)", "expected an object");
    static const std::set<std::string> allowed{"scenario", "replications", "sim",   "methods",    "alpha",
                                               "cv",       "cv_every_rep", "basis", "components", "cluster",
                                               "seed",     "jobs"};
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) field_error(key, "unknown field");
    }
    ExperimentSpec s;
    const auto scenario = field<std::string>(j, "scenario", "estimation");
    if (scenario == "estimation") {
        s.scenario = Scenario::Estimation;
    } else if (scenario == "clustering") {
        s.scenario = Scenario::Clustering;
        s.sim.mean_mode = MeanMode::Clusters;
        s.methods = {Method::Mfpca, Method::Remfpca};
    } else {
        field_error("scenario", "expected estimation or clustering, got '" + scenario + "'");
    }
    s.replications = field(j, "replications", s.replications);
    if (j.contains("sim")) {
        json sim = j.at("sim");
        if (!sim.is_object()) field_error("sim", "expected an object");
        if (s.scenario == Scenario::Clustering && !sim.contains("mean_mode")) sim["mean_mode"] = "clusters";
        s.sim = io::sim_config_from_json(sim);
    }
    if (j.contains("methods")) {
        s.methods.clear();
        for (const auto& name : field<std::vector<std::string>>(j, "methods", {})) s.methods.push_back(method_from_name(name));
    }
    if (j.contains("alpha")) {
        const auto& a = j.at("alpha");
        if (a.is_string()) {
            if (a.get<std::string>() != "cv") field_error("alpha", "expected \"cv\", a number or an array");
            s.alpha_policy = AlphaPolicy::Cv;
        } else if (a.is_number()) {
            s.alpha_policy = AlphaPolicy::Fixed;
            s.fixed_alpha = {a.get<double>()};
        } else if (a.is_array()) {
            s.alpha_policy = AlphaPolicy::Fixed;
            s.fixed_alpha = field<std::vector<double>>(j, "alpha", {});
        } else {
            field_error("alpha", "expected \"cv\", a number or an array");
        }
    }
    if (j.contains("cv")) s.cv = io::cv_config_from_json(j.at("cv"), 2);
    s.cv_every_rep = field(j, "cv_every_rep", s.cv_every_rep);
    if (j.contains("basis")) {
        const auto& b = j.at("basis");
        for (const auto& [key, _] : b.items()) {
            if (key != "kind" && key != "n_basis" && key != "order") field_error("basis." + key, "unknown field");
        }
        const auto kind = field<std::string>(b, "kind", "bspline");
        if (kind == "bspline") {
            s.basis.kind = BasisKind::BSpline;
        } else if (kind == "fourier") {
            s.basis.kind = BasisKind::Fourier;
        } else if (kind == "sine") {
            s.basis.kind = BasisKind::Sine;
        } else {
            field_error("basis.kind", "expected bspline, fourier or sine");
        }
        s.basis.n_basis = field(b, "n_basis", s.basis.n_basis);
        s.basis.order = field(b, "order", s.basis.order);
    }
    s.components = field(j, "components", s.components);
    if (j.contains("cluster")) {
        const auto& c = j.at("cluster");
        for (const auto& [key, _] : c.items()) {
            if (key != "scores" && key != "k" && key != "k_range") field_error("cluster." + key, "unknown field");
        }
        s.cluster_scores = field(c, "scores", s.cluster_scores);
        if (c.contains("k")) {
            if (c.at("k").is_string() && c.at("k").get<std::string>() == "auto") {
                s.cluster_k = 0;
            } else {
                s.cluster_k = field(c, "k", s.cluster_k);
            }
        }
        s.k_range = field(c, "k_range", s.k_range);
    }
    s.master_seed = field<std::uint64_t>(j, "seed", s.master_seed);
    s.jobs = field(j, "jobs", s.jobs);
    s.validate();
    return s;
}

json experiment_spec_to_json(const ExperimentSpec& s) {
    json j;
    j["scenario"] = s.scenario == Scenario::Estimation ? "estimation" : "clustering";
    j["replications"] = s.replications;
    j["sim"] = io::sim_config_to_json(s.sim);
    std::vector<std::string> methods;
    for (Method m : s.methods) methods.push_back(method_name(m));
    j["methods"] = methods;
    if (s.alpha_policy == AlphaPolicy::Cv) {
        j["alpha"] = "cv";
    } else {
        j["alpha"] = s.fixed_alpha;
    }
    j["cv"] = io::cv_config_to_json(s.cv);
    j["cv_every_rep"] = s.cv_every_rep;
    j["basis"] = {{"kind", kind_name(s.basis.kind)}, {"n_basis", s.basis.n_basis}, {"order", s.basis.order}};
    j["components"] = s.components;
    j["cluster"] = {{"scores", s.cluster_scores}, {"k", s.cluster_k}, {"k_range", s.k_range}};
    j["seed"] = s.master_seed;
    return j;
}

std::uint64_t replication_seed(const ExperimentSpec& spec, int replication) {
    return derive_seed(spec.master_seed, static_cast<std::uint64_t>(replication));
}

Replicate make_replicate(const ExperimentSpec& spec, int replication) {
    SimConfig cfg = spec.sim;
    cfg.seed = replication_seed(spec, replication);
    SimResult sim = generate(cfg);
    const Interval unit(0.0, 1.0);
    std::vector<BasisSystem> bases{spec.basis.build(unit), spec.basis.build(unit)};
    MFDataset data = smooth_to_coeffs(sim.observations, bases);
    if (cfg.mean_mode == MeanMode::Clusters) data.set_labels(sim.truth.labels);
    return {cfg, std::move(data), std::move(sim.truth)};
}

namespace {

CvConfig cv_for(const ExperimentSpec& spec, std::size_t p) {
    CvConfig cfg = spec.cv;
    if (cfg.grid.size() != p) {
        if (cfg.grid.empty()) {
            cfg.grid = CvConfig::default_grid(p);
        } else {
            cfg.grid.assign(p, cfg.grid.front());
        }
    }
    return cfg;
}

}  // namespace

AlphaVector choose_alpha(const ExperimentSpec& spec, Method method, const MFDataset& data) {
    const std::size_t p = data.n_variables();
    if (!penalized(method)) return AlphaVector::zeros(p);
    if (spec.alpha_policy == AlphaPolicy::Fixed) {
        return spec.fixed_alpha.size() == 1 ? AlphaVector::uniform(p, spec.fixed_alpha.front())
                                            : AlphaVector(spec.fixed_alpha);
    }
    if (!marginal(method)) return cross_validate(data, cv_for(spec, p)).best_alpha;
    std::vector<double> values;
    for (std::size_t j = 0; j < p; ++j) {
        const MFDataset single = data.variable(j);
        values.push_back(cross_validate(single, cv_for(spec, 1)).best_alpha[0]);
    }
    return AlphaVector(values);
}

MarginalEstimate combine_marginal(const std::vector<RemfpcaModel>& fits, const MFDataset& data) {
    const std::size_t p = fits.size();
    if (p != data.n_variables()) throw Error(ErrorCode::DimensionMismatch, "one marginal fit per variable required");
    Eigen::Index k = fits.front().n_components();
    for (const auto& f : fits) k = std::min(k, f.n_components());
    MarginalEstimate out;
    out.eigenvalues = Eigen::VectorXd::Zero(k);
    out.eigvecs = Eigen::MatrixXd::Zero(data.total_dimension(), k);
    std::vector<Eigen::MatrixXd> sc;
    for (std::size_t j = 0; j < p; ++j) sc.push_back(scores(fits[j], data.variable(j)));
    const double w = 1.0 / std::sqrt(static_cast<double>(p));
    for (std::size_t j = 0; j < p; ++j) {
        const Eigen::MatrixXd normed = h_normalized_eigvecs(fits[j]);
        for (Eigen::Index l = 0; l < k; ++l) {
            double s = 1.0;
            if (j > 0) {
                const Eigen::VectorXd a = sc[0].col(l).array() - sc[0].col(l).mean();
                const Eigen::VectorXd b = sc[j].col(l).array() - sc[j].col(l).mean();
                s = a.dot(b) < 0.0 ? -1.0 : 1.0;
            }
            out.eigenvalues[l] += fits[j].eigenvalues[l];
            out.eigvecs.block(data.block_offset(j), l, data.block_dimension(j), 1) = s * w * normed.col(l);
        }
    }
    return out;
}

namespace {

MultiFunction truth_component(int m) {
    return {[m](double t) { return true_component(m, 0, t); }, [m](double t) { return true_component(m, 1, t); }};
}

std::vector<RemfpcaModel> marginal_fits(const MFDataset& data, const AlphaVector& alpha, Eigen::Index k) {
    std::vector<RemfpcaModel> fits;
    for (std::size_t j = 0; j < data.n_variables(); ++j) {
        fits.push_back(fit(data.variable(j), AlphaVector({alpha[j]}), k));
    }
    return fits;
}

/// Score features: the leading q scores of the fit, concatenated over the
/// marginal fits for marginal methods.
Eigen::MatrixXd features(Method method, const MFDataset& data, const AlphaVector& alpha, int q) {
    if (!marginal(method)) return scores(fit(data, alpha, q), data);
    const auto fits = marginal_fits(data, alpha, q);
    Eigen::MatrixXd out(data.n_samples(), q * static_cast<Eigen::Index>(fits.size()));
    for (std::size_t j = 0; j < fits.size(); ++j) out.middleCols(q * j, q) = scores(fits[j], data.variable(j));
    return out;
}

void estimation_records(const ExperimentSpec& spec, int rep, Method method, const Replicate& r,
                        const AlphaVector& alpha, std::vector<RepRecord>& out) {
    const int K = spec.components;
    Eigen::VectorXd lambda;
    Eigen::MatrixXd vecs;
    std::vector<double> mrae_j;
    if (!marginal(method)) {
        const RemfpcaModel model = fit(r.data, alpha, K);
        lambda = model.eigenvalues;
        vecs = model.eigvecs;
        for (int J = 1; J <= K; ++J) mrae_j.push_back(mrae(r.data, reconstruct(model, r.data, J)));
    } else {
        const auto fits = marginal_fits(r.data, alpha, K);
        const MarginalEstimate est = combine_marginal(fits, r.data);
        lambda = est.eigenvalues;
        vecs = est.eigvecs;
        for (int J = 1; J <= K; ++J) {
            Eigen::MatrixXd coeffs(r.data.n_samples(), r.data.total_dimension());
            for (std::size_t j = 0; j < fits.size(); ++j) {
                coeffs.middleCols(r.data.block_offset(j), r.data.block_dimension(j)) =
                    reconstruct(fits[j], r.data.variable(j), J).coeffs();
            }
            mrae_j.push_back(mrae(r.data, r.data.with_coeffs(coeffs)));
        }
    }
    for (int m = 1; m <= K; ++m) {
        out.push_back({rep, method, "err_lambda", m, err_lambda(lambda[m - 1], r.truth.eigenvalues[m - 1])});
    }
    for (int m = 1; m <= K; ++m) {
        out.push_back({rep, method, "err_psi", m, err_psi(vecs.col(m - 1), r.data.bases(), truth_component(m))});
    }
    for (int J = 1; J <= K; ++J) out.push_back({rep, method, "mrae", J, mrae_j[J - 1]});
}

void clustering_records(const ExperimentSpec& spec, int rep, Method method, const Replicate& r,
                        const AlphaVector& alpha, std::vector<RepRecord>& out) {
    const Eigen::MatrixXd x = features(method, r.data, alpha, spec.cluster_scores);
    const int k = spec.cluster_k > 0 ? spec.cluster_k : choose_k_by_silhouette(x, spec.k_range);
    const ClusterEval eval = kmedoids(x, k);
    out.push_back({rep, method, "ari", 0, ari(eval.labels, r.truth.labels)});
    out.push_back({rep, method, "nmi", 0, nmi(eval.labels, r.truth.labels)});
    out.push_back({rep, method, "k", 0, static_cast<double>(k)});
}

}  // namespace

std::vector<RepRecord> run_replication(const ExperimentSpec& spec, int replication,
                                       const std::map<Method, AlphaVector>& alphas) {
    const Replicate r = make_replicate(spec, replication);
    std::vector<RepRecord> out;
    for (Method m : spec.methods) {
        AlphaVector alpha = AlphaVector::zeros(r.data.n_variables());
        if (penalized(m)) {
            const auto it = alphas.find(m);
            alpha = (spec.alpha_policy == AlphaPolicy::Cv && spec.cv_every_rep) || it == alphas.end()
                        ? choose_alpha(spec, m, r.data)
                        : it->second;
        }
        if (spec.scenario == Scenario::Estimation) {
            estimation_records(spec, replication, m, r, alpha, out);
        } else {
            clustering_records(spec, replication, m, r, alpha, out);
        }
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const ProgressFn& progress) {
    spec.validate();
    ExperimentResult result;
    result.spec_hash = io::content_hash(experiment_spec_to_json(spec).dump());

    // alpha from replication 1
    {
        const Replicate first = make_replicate(spec, 0);
        for (Method m : spec.methods) {
            if (penalized(m)) result.alphas.emplace(m, choose_alpha(spec, m, first.data));
        }
    }

    const int R = spec.replications;
    std::vector<std::vector<RepRecord>> per_rep(R);
    std::vector<std::optional<RepFailure>> failed(R);
    std::atomic<int> next{0};
    std::atomic<int> done{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (int r = next++; r < R; r = next++) {
            try {
                per_rep[r] = run_replication(spec, r, result.alphas);
            } catch (const Error& e) {
                failed[r] = RepFailure{r, error_code_name(e.code()), e.what()};
            } catch (const std::exception& e) {
                failed[r] = RepFailure{r, "E_INTERNAL", e.what()};
            }
            const int d = ++done;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(d, R);
            }
        }
    };
    const int jobs = std::min(spec.jobs, R);
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (int r = 0; r < R; ++r) {
        if (failed[r]) {
            result.failures.push_back(*failed[r]);
            continue;
        }
        result.records.insert(result.records.end(), per_rep[r].begin(), per_rep[r].end());
    }
    result.summary = summarize(result.records, spec.methods);
    return result;
}

std::vector<SummaryRow> summarize(const std::vector<RepRecord>& records, const std::vector<Method>& method_order) {
    static const std::vector<std::string> measure_order{"err_lambda", "err_psi", "mrae", "ari", "nmi", "k"};
    auto rank = [](const auto& order, const auto& v) {
        return static_cast<int>(std::find(order.begin(), order.end(), v) - order.begin());
    };
    using Key = std::tuple<int, int, int>;
    std::map<Key, std::vector<double>> groups;
    for (const auto& r : records) {
        groups[{rank(method_order, r.method), rank(measure_order, r.measure), r.index}].push_back(r.value);
    }
    std::vector<SummaryRow> out;
    for (const auto& [key, values] : groups) {
        const auto& [mi, si, index] = key;
        SummaryRow row;
        row.method = method_order.at(mi);
        row.measure = measure_order.at(si);
        row.index = index;
        row.count = static_cast<int>(values.size());
        double sum = 0.0;
        for (double v : values) sum += v;
        row.mean = sum / row.count;
        double ss = 0.0;
        for (double v : values) ss += (v - row.mean) * (v - row.mean);
        row.std = row.count > 1 ? std::sqrt(ss / (row.count - 1)) : 0.0;
        out.push_back(std::move(row));
    }
    return out;
}

io::CsvTable records_table(const ExperimentResult& result) {
    io::CsvTable t(result.spec_hash, {"replication", "method", "measure", "index", "value"});
    for (const auto& r : result.records) {
        t.add_row({std::to_string(r.replication + 1), method_name(r.method), r.measure, std::to_string(r.index),
                   io::format_double(r.value)});
    }
    return t;
}

io::CsvTable summary_table(const ExperimentResult& result) {
    io::CsvTable t(result.spec_hash, {"method", "measure", "index", "mean", "std", "count"});
    for (const auto& r : result.summary) {
        t.add_row({method_name(r.method), r.measure, std::to_string(r.index), io::format_double(r.mean),
                   io::format_double(r.std), std::to_string(r.count)});
    }
    return t;
}

std::string summary_view(const ExperimentSpec& spec, const ExperimentResult& result) {
    auto cell = [](const SummaryRow& r) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4g (%.2g)", r.mean, r.std);
        return std::string(buf);
    };
    auto find = [&](Method m, const std::string& measure, int index) -> const SummaryRow* {
        for (const auto& r : result.summary) {
            if (r.method == m && r.measure == measure && r.index == index) return &r;
        }
        return nullptr;
    };
    std::string out;
    char buf[128];
    auto header = [&](const char* first) {
        std::snprintf(buf, sizeof buf, "%-12s", first);
        out += buf;
        for (Method m : spec.methods) {
            std::snprintf(buf, sizeof buf, " %22s", method_name(m).c_str());
            out += buf;
        }
        out += '\n';
    };
    auto row = [&](const std::string& label, const std::string& measure, int index) {
        std::snprintf(buf, sizeof buf, "%-12s", label.c_str());
        out += buf;
        for (Method m : spec.methods) {
            const SummaryRow* r = find(m, measure, index);
            std::snprintf(buf, sizeof buf, " %22s", r ? cell(*r).c_str() : "-");
            out += buf;
        }
        out += '\n';
    };
    if (spec.scenario == Scenario::Estimation) {
        const std::pair<const char*, const char*> blocks[] = {
            {"err_psi", "Err(psi_m)"}, {"err_lambda", "Err(lambda_m)"}, {"mrae", "MRAE"}};
        for (const auto& [measure, title] : blocks) {
            out += std::string(title) + "\n";
            header(std::string(measure) == "mrae" ? "J" : "m");
            for (int i = 1; i <= spec.components; ++i) row(std::to_string(i), measure, i);
            out += '\n';
        }
    } else {
        std::snprintf(buf, sizeof buf, "M=%d theta=%g sigma=%g n=%d\n", spec.sim.M, spec.sim.theta, spec.sim.sigma1,
                      spec.sim.n);
        out += buf;
        header("measure");
        row("ARI", "ari", 0);
        row("NMI", "nmi", 0);
        row("k", "k", 0);
        out += '\n';
    }
    for (const auto& [m, a] : result.alphas) {
        out += "alpha[" + method_name(m) + "] =";
        for (double v : a.values()) {
            std::snprintf(buf, sizeof buf, " %g", v);
            out += buf;
        }
        out += '\n';
    }
    std::snprintf(buf, sizeof buf, "replications: %d, failures: %zu\n", spec.replications, result.failures.size());
    out += buf;
    return out;
}

}  // namespace remfpca
