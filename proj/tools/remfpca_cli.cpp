// remfpca command-line driver: simulate, fit, cv, cluster, eval, experiment.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "remfpca/core.hpp"
#include "remfpca/error.hpp"
#include "remfpca/experiment.hpp"
#include "remfpca/io.hpp"
#include "remfpca/metrics.hpp"
#include "remfpca/simulate.hpp"
#include "remfpca/tuning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace remfpca;

namespace {

fs::path default_output_dir() {
    if (const char* env = std::getenv("REMFPCA_OUTPUT_DIR"); env && *env) return env;
    return ".";
}

json load_json_arg(const std::string& arg) {
    if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) {
        try {
            return json::parse(arg);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::Parse, std::string("inline JSON: ") + e.what());
        }
    }
    return io::read_json(arg);
}

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (item.empty() || *end != '\0') throw Error(ErrorCode::InvalidConfig, std::string(what) + ": bad number '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw Error(ErrorCode::InvalidConfig, std::string(what) + ": empty list");
    return out;
}

AlphaVector alpha_for(const std::string& text, std::size_t p) {
    auto values = parse_list(text, "--alpha");
    if (values.size() == 1) values.assign(p, values.front());
    if (values.size() != p) {
        throw Error(ErrorCode::DimensionMismatch, "--alpha has " + std::to_string(values.size()) + " values for " +
                                                      std::to_string(p) + " variables");
    }
    try {
        return AlphaVector(values);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("--alpha: ") + e.what());
    }
}

struct Loaded {
    GridObservations obs;
    MFDataset data;
    std::string hash;  ///< content hash of the data file and basis spec
};

Loaded load_data(const std::string& data_path, const json& basis_spec) {
    const std::string text = io::read_text(data_path);
    GridObservations obs = io::parse_long_csv(text);
    auto bases = io::bases_for(obs, basis_spec);
    std::vector<std::string> names;
    for (const auto& v : obs.variables) names.push_back(v.name);
    MFDataset smoothed = smooth_to_coeffs(obs, bases);
    MFDataset data(smoothed.bases(), smoothed.coeffs(), names);
    return {std::move(obs), std::move(data), io::content_hash(text + basis_spec.dump())};
}

RemfpcaModel load_model(const std::string& path) {
    const json j = io::read_json(path);
    try {
        return model_from_json(j);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, path + ": " + e.what());
    }
}

/// Smooths `data_path` onto the model's bases (and weights).
MFDataset data_for_model(const RemfpcaModel& model, const std::string& data_path, GridObservations* obs_out = nullptr) {
    GridObservations obs = io::read_long_csv(data_path);
    if (obs.n_variables() != model.bases.size()) {
        throw Error(ErrorCode::DimensionMismatch, "data has " + std::to_string(obs.n_variables()) +
                                                      " variables, the model " + std::to_string(model.bases.size()));
    }
    MFDataset out(model.bases, smooth_to_coeffs(obs, model.bases).coeffs(), model.names);
    if (model.weights) out = apply_weights(out, *model.weights);
    if (obs_out) *obs_out = std::move(obs);
    return out;
}

void emit_error(const Error& e) {
    const json j = {{"error", {{"code", error_code_name(e.code())}, {"message", e.what()}}}};
    std::cerr << j.dump() << "\n";
}

void note(bool quiet, const std::string& msg) {
    if (!quiet) std::cerr << msg << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regularized multivariate functional PCA"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string out_dir = default_output_dir().string();
    bool quiet = false;
    app.add_option("-o,--out", out_dir, "Output directory (default: $REMFPCA_OUTPUT_DIR or .)");
    app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a simulated bivariate dataset");
    std::string sim_config;
    std::optional<std::uint64_t> sim_seed;
    sim->add_option("config", sim_config, "Simulation config (JSON file or inline JSON)")->required();
    sim->add_option("--seed", sim_seed, "Override the config seed");

    // fit
    auto* fitc = app.add_subcommand("fit", "Fit a (regularized) MFPCA model");
    std::string fit_data, fit_basis, fit_alpha = "0", fit_alpha_file;
    int fit_k = 3, fit_points = 101;
    bool fit_oracle = false, fit_weights = false;
    fitc->add_option("--data", fit_data, "Long-format observation CSV")->required();
    fitc->add_option("--basis", fit_basis, "Basis spec (JSON file or inline JSON)")->required();
    auto* alpha_opt = fitc->add_option("--alpha", fit_alpha, "Smoothing parameters: one value or a comma list");
    fitc->add_option("--alpha-from", fit_alpha_file, "Take alpha from a cv_result.json")->excludes(alpha_opt);
    fitc->add_option("-k,--components", fit_k, "Number of components");
    fitc->add_option("--points", fit_points, "Evaluation points per variable for pcs.csv");
    fitc->add_flag("--oracle", fit_oracle, "Use the direct generalized eigensolver");
    fitc->add_flag("--weights", fit_weights, "Rescale variables to unit integrated variance first");

    // cv
    auto* cvc = app.add_subcommand("cv", "Select alpha by cross-validation");
    std::string cv_data, cv_basis, cv_config;
    std::optional<int> cv_folds, cv_J;
    std::optional<std::uint64_t> cv_seed;
    std::optional<std::string> cv_search, cv_grid;
    cvc->add_option("--data", cv_data, "Long-format observation CSV")->required();
    cvc->add_option("--basis", cv_basis, "Basis spec (JSON file or inline JSON)")->required();
    cvc->add_option("--config", cv_config, "CV config (JSON file or inline JSON)");
    cvc->add_option("--folds", cv_folds, "Number of folds");
    cvc->add_option("--J", cv_J, "Truncation level of the CV loss");
    cvc->add_option("--seed", cv_seed, "Fold assignment seed");
    cvc->add_option("--search", cv_search, "full_grid, coordinate_wise or shared");
    cvc->add_option("--grid", cv_grid, "Comma list used as the grid of every variable");

    // cluster
    auto* clc = app.add_subcommand("cluster", "k-medoids clustering of PC scores");
    std::string cl_model, cl_data, cl_truth;
    std::string cl_k = "auto";
    int cl_kmin = 2, cl_kmax = 6, cl_scores = 0;
    clc->add_option("--model", cl_model, "model.json from fit")->required();
    clc->add_option("--data", cl_data, "Long-format observation CSV")->required();
    clc->add_option("-k,--clusters", cl_k, "Number of clusters or 'auto'");
    clc->add_option("--k-min", cl_kmin, "Smallest k tried by auto");
    clc->add_option("--k-max", cl_kmax, "Largest k tried by auto");
    clc->add_option("--scores", cl_scores, "Leading scores used as features (default: all)");
    clc->add_option("--truth", cl_truth, "truth.json with labels for ARI/NMI");

    // eval
    auto* evc = app.add_subcommand("eval", "Evaluate a model against data and optional truth");
    std::string ev_model, ev_data, ev_truth;
    evc->add_option("--model", ev_model, "model.json from fit")->required();
    evc->add_option("--data", ev_data, "Long-format observation CSV")->required();
    evc->add_option("--truth", ev_truth, "truth.json from simulate (eigenvalue and component errors)");

    // experiment
    auto* exc = app.add_subcommand("experiment", "Run a replicated simulation experiment");
    std::string ex_spec;
    std::optional<int> ex_jobs, ex_reps;
    std::optional<std::uint64_t> ex_seed;
    bool ex_cv_every = false;
    exc->add_option("spec", ex_spec, "Experiment spec (JSON file or inline JSON)")->required();
    exc->add_option("-j,--jobs", ex_jobs, "Concurrent replications");
    exc->add_option("--replications", ex_reps, "Override the replication count");
    exc->add_option("--seed", ex_seed, "Override the master seed");
    exc->add_flag("--cv-every-rep", ex_cv_every, "Tune alpha on every replication");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const fs::path out(out_dir);
    try {
        if (*sim) {
            json cfg_json = load_json_arg(sim_config);
            SimConfig cfg = io::sim_config_from_json(cfg_json);
            if (sim_seed) cfg.seed = *sim_seed;
            const json echo = io::sim_config_to_json(cfg);
            const std::string hash = io::content_hash(echo.dump());
            const SimResult r = generate(cfg);
            io::write_text(out / "observations.csv", io::long_csv(r.observations, hash));
            io::write_json(out / "truth.json", io::truth_json(cfg, r.truth));
            note(quiet, "wrote " + (out / "observations.csv").string() + " and truth.json");
        } else if (*fitc) {
            const json basis = load_json_arg(fit_basis);
            Loaded L = load_data(fit_data, basis);
            AlphaVector alpha = fit_alpha_file.empty()
                                    ? alpha_for(fit_alpha, L.data.n_variables())
                                    : AlphaVector(io::read_json(fit_alpha_file).at("best_alpha").get<std::vector<double>>());
            MFDataset data = L.data;
            std::optional<Eigen::VectorXd> weights;
            if (fit_weights) {
                weights = rescale_weights(data);
                data = apply_weights(data, *weights);
            }
            RemfpcaModel model = fit_oracle ? oracle_fit(data, alpha, fit_k) : fit(data, alpha, fit_k);
            model.weights = weights;
            std::ostringstream tag;
            tag << L.hash << ";" << io::content_hash(json(alpha.values()).dump()) << ";k=" << fit_k
                << ";oracle=" << fit_oracle << ";weights=" << fit_weights;
            const std::string hash = io::content_hash(tag.str());

            json warnings = json::array();
            if (model.rank < model.n_components()) {
                warnings.push_back({{"code", "W_RANK"},
                                    {"message", "k=" + std::to_string(fit_k) + " exceeds the numerical rank " +
                                                    std::to_string(model.rank) + "; trailing eigenvalues are zero"},
                                    {"rank", model.rank},
                                    {"k", fit_k}});
                std::cerr << json({{"warning", warnings.back()}}).dump() << "\n";
            }
            json mj = model;
            io::write_json(out / "model.json", mj);
            io::eigenvalue_table(model, hash).write(out / "eigenvalues.csv");
            io::pc_table(model, fit_points, hash).write(out / "pcs.csv");
            io::scores_table(scores(model, data), L.obs.sample_ids, hash).write(out / "scores.csv");
            io::coefficient_table(L.data, hash).write(out / "coefficients.csv");
            io::write_json(out / "dataset.json", io::dataset_manifest(L.data, "coefficients.csv"));
            io::write_json(out / "fit_report.json", {{"spec_hash", hash}, {"rank", model.rank}, {"warnings", warnings}});
            note(quiet, "fitted " + std::to_string(fit_k) + " components (rank " + std::to_string(model.rank) + ")");
        } else if (*cvc) {
            const json basis = load_json_arg(cv_basis);
            Loaded L = load_data(cv_data, basis);
            const std::size_t p = L.data.n_variables();
            CvConfig cfg = cv_config.empty() ? io::cv_config_from_json(json::object(), p)
                                             : io::cv_config_from_json(load_json_arg(cv_config), p);
            if (cv_folds) cfg.folds = *cv_folds;
            if (cv_J) cfg.J = *cv_J;
            if (cv_seed) cfg.seed = *cv_seed;
            if (cv_search) cfg.search = io::cv_config_from_json({{"search", *cv_search}}, p).search;
            if (cv_grid) cfg.grid.assign(p, parse_list(*cv_grid, "--grid"));
            const json cfg_json = io::cv_config_to_json(cfg);
            const std::string hash = io::content_hash(L.hash + cfg_json.dump());
            const CvResult r = cross_validate(L.data, cfg);
            io::cv_table(r, p, hash).write(out / "cv_table.csv");
            io::write_json(out / "cv_result.json", {{"best_alpha", r.best_alpha.values()},
                                                    {"best_loss", r.best_loss},
                                                    {"config", cfg_json},
                                                    {"spec_hash", hash}});
            std::ostringstream msg;
            msg << "best alpha:";
            for (double a : r.best_alpha.values()) msg << " " << a;
            msg << " (loss " << r.best_loss << ")";
            note(quiet, msg.str());
        } else if (*clc) {
            const RemfpcaModel model = load_model(cl_model);
            GridObservations obs;
            const MFDataset data = data_for_model(model, cl_data, &obs);
            Eigen::MatrixXd x = scores(model, data);
            if (cl_scores > 0) {
                if (cl_scores > x.cols()) {
                    throw Error(ErrorCode::InvalidK, "--scores " + std::to_string(cl_scores) + " exceeds the " +
                                                         std::to_string(x.cols()) + " fitted components");
                }
                x = x.leftCols(cl_scores).eval();
            }
            const std::string hash =
                io::content_hash(io::read_text(cl_model) + io::read_text(cl_data) + cl_k + std::to_string(cl_scores));
            int k = 0;
            json report;
            if (cl_k == "auto") {
                std::vector<int> range;
                for (int kk = cl_kmin; kk <= cl_kmax; ++kk) range.push_back(kk);
                std::vector<double> means;
                k = choose_k_by_silhouette(x, range, 0, &means);
                io::CsvTable t(hash, {"k", "silhouette_mean"});
                for (std::size_t i = 0; i < range.size(); ++i) t.add_row({std::to_string(range[i]), io::format_double(means[i])});
                t.write(out / "silhouette_k.csv");
                report["k_selection"] = "silhouette";
            } else {
                try {
                    std::size_t used = 0;
                    k = std::stoi(cl_k, &used);
                    if (used != cl_k.size()) throw std::invalid_argument(cl_k);
                } catch (const std::exception&) {
                    throw Error(ErrorCode::InvalidConfig, "-k must be an integer or 'auto', got '" + cl_k + "'");
                }
                report["k_selection"] = "fixed";
            }
            ClusterEval eval = kmedoids(x, k);
            if (!cl_truth.empty()) {
                const auto labels = io::read_json(cl_truth).at("labels").get<std::vector<int>>();
                eval.ari = ari(eval.labels, labels);
                eval.nmi = nmi(eval.labels, labels);
            }
            io::cluster_table(eval, obs.sample_ids, hash).write(out / "clusters.csv");
            report["k"] = k;
            report["medoids"] = eval.medoid_indices;
            report["objective"] = eval.objective;
            report["silhouette_mean"] = eval.silhouette_mean;
            report["ari"] = eval.ari ? json(*eval.ari) : json(nullptr);
            report["nmi"] = eval.nmi ? json(*eval.nmi) : json(nullptr);
            report["nmi_normalization"] = "arithmetic_mean";
            report["spec_hash"] = hash;
            io::write_json(out / "cluster_eval.json", report);
            note(quiet, "k=" + std::to_string(k) + ", silhouette " + io::format_double(eval.silhouette_mean));
        } else if (*evc) {
            const RemfpcaModel model = load_model(ev_model);
            const MFDataset data = data_for_model(model, ev_data);
            json records = json::array();
            for (Eigen::Index J = 1; J <= model.n_components(); ++J) {
                records.push_back({{"measure", "mrae"}, {"index", J}, {"value", mrae(data, reconstruct(model, data, J))}});
            }
            if (!ev_truth.empty()) {
                const json truth = io::read_json(ev_truth);
                const auto lambda = truth.at("eigenvalues").get<std::vector<double>>();
                if (model.bases.size() != 2) {
                    throw Error(ErrorCode::DimensionMismatch, "truth comparison needs the bivariate simulation layout");
                }
                const Eigen::Index K = std::min<Eigen::Index>(model.n_components(), static_cast<Eigen::Index>(lambda.size()));
                for (Eigen::Index m = 1; m <= K; ++m) {
                    records.push_back({{"measure", "err_lambda"},
                                       {"index", m},
                                       {"value", err_lambda(model.eigenvalues[m - 1], lambda[m - 1])}});
                }
                for (Eigen::Index m = 1; m <= K; ++m) {
                    const int mm = static_cast<int>(m);
                    const MultiFunction psi{[mm](double t) { return true_component(mm, 0, t); },
                                            [mm](double t) { return true_component(mm, 1, t); }};
                    records.push_back(
                        {{"measure", "err_psi"}, {"index", m}, {"value", err_psi(model.eigvecs.col(m - 1), model.bases, psi)}});
                }
            }
            io::write_json(out / "metrics.json", records);
            std::cout << records.dump(2) << "\n";
        } else if (*exc) {
            ExperimentSpec spec = experiment_spec_from_json(load_json_arg(ex_spec));
            if (ex_jobs) spec.jobs = *ex_jobs;
            if (ex_reps) spec.replications = *ex_reps;
            if (ex_seed) spec.master_seed = *ex_seed;
            if (ex_cv_every) spec.cv_every_rep = true;
            spec.validate();
            const ExperimentResult r = run_experiment(spec, [&](int done, int total) {
                if (!quiet) std::cerr << "\rreplication " << done << "/" << total << std::flush;
            });
            if (!quiet) std::cerr << "\n";
            records_table(r).write(out / "records.csv");
            summary_table(r).write(out / "summary.csv");
            const std::string view = summary_view(spec, r);
            io::write_text(out / "summary.txt", view);
            json meta;
            meta["spec"] = experiment_spec_to_json(spec);
            meta["spec_hash"] = r.spec_hash;
            meta["failures"] = json::array();
            for (const auto& f : r.failures) {
                meta["failures"].push_back({{"replication", f.replication + 1}, {"code", f.code}, {"message", f.message}});
            }
            json alphas = json::object();
            for (const auto& [m, a] : r.alphas) alphas[method_name(m)] = a.values();
            meta["alphas"] = alphas;
            meta["nmi_normalization"] = "arithmetic_mean";
            io::write_json(out / "experiment.json", meta);
            std::cout << view;
        }
    } catch (const Error& e) {
        emit_error(e);
        return exit_status(e.code());
    } catch (const json::exception& e) {
        emit_error(Error(ErrorCode::Parse, e.what()));
        return 2;
    } catch (const fs::filesystem_error& e) {
        emit_error(Error(ErrorCode::Io, e.what()));
        return 4;
    }
    return 0;
}
