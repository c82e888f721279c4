#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "remfpca/core.hpp"
#include "remfpca/error.hpp"
#include "remfpca/experiment.hpp"
#include "remfpca/metrics.hpp"
#include "remfpca/simulate.hpp"
#include "remfpca/tuning.hpp"

namespace py = pybind11;
using namespace remfpca;

namespace {

MFDataset smooth(const std::vector<Eigen::VectorXd>& grids, const std::vector<Eigen::MatrixXd>& values,
                 const std::vector<BasisSystem>& bases, std::vector<std::string> names) {
    if (grids.size() != values.size()) throw Error(ErrorCode::DimensionMismatch, "one value matrix per grid required");
    GridObservations obs;
    for (std::size_t j = 0; j < grids.size(); ++j) {
        obs.variables.push_back({j < names.size() ? names[j] : "x" + std::to_string(j + 1), grids[j], values[j]});
    }
    if (names.empty()) {
        for (const auto& v : obs.variables) names.push_back(v.name);
    }
    MFDataset s = smooth_to_coeffs(obs, bases);
    return MFDataset(s.bases(), s.coeffs(), names);
}

py::dict simulate(int n, int M, double theta, double sigma1, double sigma2, double rho, int grid, bool clusters,
                  std::uint64_t seed) {
    SimConfig cfg;
    cfg.n = n;
    cfg.M = M;
    cfg.theta = theta;
    cfg.sigma1 = sigma1;
    cfg.sigma2 = sigma2;
    cfg.rho = rho;
    cfg.grid1 = cfg.grid2 = grid;
    cfg.mean_mode = clusters ? MeanMode::Clusters : MeanMode::Zero;
    cfg.seed = seed;
    const SimResult r = generate(cfg);
    py::dict d;
    py::list grids, values;
    for (const auto& v : r.observations.variables) {
        grids.append(v.grid);
        values.append(v.values);
    }
    d["grids"] = grids;
    d["values"] = values;
    d["eigenvalues"] = r.truth.eigenvalues;
    d["labels"] = r.truth.labels;
    d["scores"] = r.truth.scores;
    return d;
}

py::dict cluster_dict(const ClusterEval& e) {
    py::dict d;
    d["labels"] = e.labels;
    d["medoids"] = e.medoid_indices;
    d["objective"] = e.objective;
    d["silhouette_mean"] = e.silhouette_mean;
    d["silhouette"] = e.silhouette_values;
    return d;
}

}  // namespace

PYBIND11_MODULE(_remfpca, m) {
    m.doc() = "Regularized multivariate functional PCA";

    static py::exception<Error> error(m, "RemfpcaError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, (std::string(error_code_name(e.code())) + ": " + e.what()).c_str());
        }
    });

    py::class_<BasisSystem>(m, "BasisSystem")
        .def_static(
            "bspline",
            [](double a, double b, int n_basis, int order) { return BasisSystem::bspline(Interval(a, b), n_basis, order); },
            py::arg("lower"), py::arg("upper"), py::arg("n_basis"), py::arg("order") = 4)
        .def_static(
            "fourier", [](double a, double b, int n_basis) { return BasisSystem::fourier(Interval(a, b), n_basis); },
            py::arg("lower"), py::arg("upper"), py::arg("n_basis"))
        .def_static(
            "sine", [](double a, double b, int n_basis) { return BasisSystem::sine(Interval(a, b), n_basis); },
            py::arg("lower"), py::arg("upper"), py::arg("n_basis"))
        .def_property_readonly("dimension", &BasisSystem::dimension)
        .def_property_readonly("order", &BasisSystem::order)
        .def_property_readonly("knots", &BasisSystem::knots)
        .def_property_readonly("gram", &BasisSystem::gram)
        .def_property_readonly("penalty", &BasisSystem::penalty)
        .def(
            "evaluate",
            [](const BasisSystem& b, const std::vector<double>& t, int derivative) { return b.evaluate(t, derivative); },
            py::arg("points"), py::arg("derivative") = 0)
        .def("__repr__", &BasisSystem::describe);

    py::class_<MFDataset>(m, "MFDataset")
        .def(py::init<std::vector<BasisSystem>, Eigen::MatrixXd, std::vector<std::string>>(), py::arg("bases"),
             py::arg("coeffs"), py::arg("names") = std::vector<std::string>{})
        .def_property_readonly("coeffs", &MFDataset::coeffs)
        .def_property_readonly("bases", &MFDataset::bases)
        .def_property_readonly("names", &MFDataset::names)
        .def_property_readonly("n_samples", &MFDataset::n_samples)
        .def_property_readonly("gram", &MFDataset::gram)
        .def("variable", &MFDataset::variable);

    py::class_<RemfpcaModel>(m, "Model")
        .def_readonly("eigenvalues", &RemfpcaModel::eigenvalues)
        .def_readonly("eigvecs", &RemfpcaModel::eigvecs)
        .def_readonly("mean", &RemfpcaModel::mean)
        .def_readonly("rank", &RemfpcaModel::rank)
        .def_property_readonly("alpha", [](const RemfpcaModel& model) { return model.alpha.values(); })
        .def("alpha_metric", &RemfpcaModel::alpha_metric)
        .def("to_json", [](const RemfpcaModel& model) { return nlohmann::json(model).dump(); })
        .def_static("from_json", [](const std::string& s) { return model_from_json(nlohmann::json::parse(s)); });

    m.def("smooth", &smooth, py::arg("grids"), py::arg("values"), py::arg("bases"),
          py::arg("names") = std::vector<std::string>{}, "Least-squares basis coefficients of grid observations");
    m.def(
        "fit",
        [](const MFDataset& d, const std::vector<double>& alpha, Eigen::Index k, bool oracle) {
            return oracle ? oracle_fit(d, AlphaVector(alpha), k) : fit(d, AlphaVector(alpha), k);
        },
        py::arg("data"), py::arg("alpha"), py::arg("k"), py::arg("oracle") = false);
    m.def("scores", &scores, py::arg("model"), py::arg("data"));
    m.def(
        "reconstruct", [](const RemfpcaModel& model, const MFDataset& d, Eigen::Index J) {
            return reconstruct(model, d, J).coeffs();
        },
        py::arg("model"), py::arg("data"), py::arg("J"));
    m.def(
        "mrae", [](const MFDataset& d, const Eigen::MatrixXd& coeffs) { return mrae(d, d.with_coeffs(coeffs)); },
        py::arg("data"), py::arg("reconstructed_coeffs"));
    m.def("eval_pcs", &eval_pcs, py::arg("model"), py::arg("points"), py::arg("h_normalized") = false);
    m.def("rescale_weights", &rescale_weights);
    m.def("apply_weights", &apply_weights);
    m.def(
        "cross_validate",
        [](const MFDataset& d, int folds, int J, std::vector<double> grid, const std::string& search, std::uint64_t seed) {
            CvConfig cfg;
            cfg.folds = folds;
            cfg.J = J;
            cfg.seed = seed;
            cfg.grid = grid.empty() ? CvConfig::default_grid(d.n_variables())
                                    : std::vector<std::vector<double>>(d.n_variables(), grid);
            if (search == "full_grid") {
                cfg.search = SearchMode::FullGrid;
            } else if (search == "shared") {
                cfg.search = SearchMode::Shared;
            } else if (search == "coordinate_wise") {
                cfg.search = SearchMode::CoordinateWise;
            } else {
                throw Error(ErrorCode::InvalidConfig, "unknown search mode '" + search + "'");
            }
            const CvResult r = cross_validate(d, cfg);
            return py::make_tuple(r.best_alpha.values(), r.best_loss);
        },
        py::arg("data"), py::arg("folds") = 5, py::arg("J") = 3, py::arg("grid") = std::vector<double>{},
        py::arg("search") = "coordinate_wise", py::arg("seed") = 1);

    m.def("simulate", &simulate, py::arg("n") = 100, py::arg("M") = 100, py::arg("theta") = 1.0,
          py::arg("sigma1") = 0.5, py::arg("sigma2") = 0.5, py::arg("rho") = 0.4, py::arg("grid") = 101,
          py::arg("clusters") = false, py::arg("seed") = 1);
    m.def("true_eigenvalue", &true_eigenvalue);

    m.def(
        "kmedoids", [](const Eigen::MatrixXd& x, int k) { return cluster_dict(kmedoids(x, k)); }, py::arg("points"),
        py::arg("k"));
    m.def(
        "silhouette",
        [](const Eigen::MatrixXd& x, const std::vector<int>& labels) {
            const Silhouette s = silhouette(x, labels);
            return py::make_tuple(s.values, s.mean);
        },
        py::arg("points"), py::arg("labels"));
    m.def(
        "ari", [](const std::vector<int>& a, const std::vector<int>& b) { return ari(a, b); }, py::arg("a"), py::arg("b"));
    m.def(
        "nmi", [](const std::vector<int>& a, const std::vector<int>& b) { return nmi(a, b); }, py::arg("a"), py::arg("b"));
    m.def(
        "choose_k_by_silhouette",
        [](const Eigen::MatrixXd& x, const std::vector<int>& ks) { return choose_k_by_silhouette(x, ks); },
        py::arg("points"), py::arg("k_range"));

    m.def(
        "run_experiment",
        [](const std::string& spec_json) {
            const ExperimentSpec spec = experiment_spec_from_json(nlohmann::json::parse(spec_json));
            const ExperimentResult r = run_experiment(spec);
            return py::make_tuple(summary_table(r).str(), static_cast<int>(r.failures.size()));
        },
        py::arg("spec_json"), "Runs an experiment spec; returns (summary CSV text, failure count)");
}
