#include "remfpca/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "remfpca/error.hpp"

namespace remfpca::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string content_hash(std::string_view text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvTable::CsvTable(std::string spec_hash, std::vector<std::string> header)
    : spec_hash_(std::move(spec_hash)), header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) {
        throw Error(ErrorCode::DimensionMismatch, "csv row has " + std::to_string(cells.size()) + " cells, header has " +
                                                      std::to_string(header_.size()));
    }
    rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
    std::string out = "# spec_hash=" + spec_hash_ + "\n";
    auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

void CsvTable::write(const fs::path& path) const { write_text(path, str()); }

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
    }
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot move output into '" + path.string() + "': " + ec.message());
}

json read_json(const fs::path& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t pos = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
        throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view s, std::size_t line, const char* field) {
    const std::string str(s);
    char* end = nullptr;
    const double v = std::strtod(str.c_str(), &end);
    if (str.empty() || end != str.c_str() + str.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ": field '" + field + "' is not a finite number: '" +
                                          str + "'");
    }
    return v;
}

}  // namespace

GridObservations parse_long_csv(std::string_view text) {
    std::vector<std::string> var_order, sample_order;
    std::map<std::string, std::size_t> var_index, sample_index;
    // per variable, per sample: (t, value) in file order
    std::vector<std::vector<std::vector<std::pair<double, double>>>> cells;

    bool header_seen = false;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split(line, ',');
        if (!header_seen) {
            if (fields.size() != 4 || trim(fields[0]) != "sample_id" || trim(fields[1]) != "variable" ||
                trim(fields[2]) != "t" || trim(fields[3]) != "value") {
                throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) +
                                                  ": expected header 'sample_id,variable,t,value'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 4) {
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected 4 fields, got " +
                                              std::to_string(fields.size()));
        }
        const std::string sid(trim(fields[0])), var(trim(fields[1]));
        if (sid.empty() || var.empty()) throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": empty id");
        const double t = parse_number(trim(fields[2]), line_no, "t");
        const double v = parse_number(trim(fields[3]), line_no, "value");
        auto [vit, vnew] = var_index.emplace(var, var_order.size());
        if (vnew) {
            var_order.push_back(var);
            cells.emplace_back();
        }
        auto [sit, snew] = sample_index.emplace(sid, sample_order.size());
        if (snew) sample_order.push_back(sid);
        auto& per_var = cells[vit->second];
        if (per_var.size() <= sit->second) per_var.resize(sit->second + 1);
        per_var[sit->second].emplace_back(t, v);
        if (end == text.size()) break;
    }
    if (!header_seen) throw Error(ErrorCode::Parse, "missing header 'sample_id,variable,t,value'");
    if (sample_order.empty()) throw Error(ErrorCode::Parse, "no observations");

    GridObservations obs;
    obs.sample_ids = sample_order;
    const auto n = static_cast<Eigen::Index>(sample_order.size());
    for (std::size_t j = 0; j < var_order.size(); ++j) {
        auto& per_var = cells[j];
        per_var.resize(sample_order.size());
        for (auto& s : per_var) std::stable_sort(s.begin(), s.end(), [](auto& a, auto& b) { return a.first < b.first; });
        const auto& ref = per_var.front();
        GridVariable gv;
        gv.name = var_order[j];
        gv.grid.resize(static_cast<Eigen::Index>(ref.size()));
        for (std::size_t k = 0; k < ref.size(); ++k) gv.grid[static_cast<Eigen::Index>(k)] = ref[k].first;
        gv.values.resize(n, gv.grid.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& s = per_var[i];
            if (s.size() != ref.size()) {
                throw Error(ErrorCode::Parse, "sample '" + sample_order[i] + "' has " + std::to_string(s.size()) +
                                                  " points for variable '" + gv.name + "', expected " +
                                                  std::to_string(ref.size()));
            }
            for (std::size_t k = 0; k < s.size(); ++k) {
                const double tol = 1e-12 * std::max(1.0, std::abs(ref[k].first));
                if (std::abs(s[k].first - ref[k].first) > tol) {
                    throw Error(ErrorCode::Parse, "sample '" + sample_order[i] + "' uses a different grid for variable '" +
                                                      gv.name + "'");
                }
                gv.values(i, static_cast<Eigen::Index>(k)) = s[k].second;
            }
        }
        obs.variables.push_back(std::move(gv));
    }
    try {
        obs.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::Parse, e.what());
    }
    return obs;
}

GridObservations read_long_csv(const fs::path& path) { return parse_long_csv(read_text(path)); }

std::string long_csv(const GridObservations& obs, const std::string& spec_hash) {
    std::string out = "# spec_hash=" + spec_hash + "\nsample_id,variable,t,value\n";
    for (Eigen::Index i = 0; i < obs.n_samples(); ++i) {
        const std::string id = i < static_cast<Eigen::Index>(obs.sample_ids.size()) ? obs.sample_ids[i] : std::to_string(i);
        for (const auto& v : obs.variables) {
            for (Eigen::Index k = 0; k < v.grid.size(); ++k) {
                out += id;
                out += ',';
                out += v.name;
                out += ',';
                out += format_double(v.grid[k]);
                out += ',';
                out += format_double(v.values(i, k));
                out += '\n';
            }
        }
    }
    return out;
}

CsvTable coefficient_table(const MFDataset& data, const std::string& spec_hash) {
    std::vector<std::string> header{"sample_id"};
    for (std::size_t j = 0; j < data.n_variables(); ++j) {
        const std::string name = j < data.names().size() ? data.names()[j] : "x" + std::to_string(j + 1);
        for (Eigen::Index c = 0; c < data.block_dimension(j); ++c) header.push_back(name + "_" + std::to_string(c + 1));
    }
    CsvTable table(spec_hash, header);
    for (Eigen::Index i = 0; i < data.n_samples(); ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (Eigen::Index c = 0; c < data.total_dimension(); ++c) row.push_back(format_double(data.coeffs()(i, c)));
        table.add_row(std::move(row));
    }
    return table;
}

json dataset_manifest(const MFDataset& data, const std::string& coefficient_file) {
    json j;
    j["names"] = data.names();
    j["bases"] = data.bases();
    j["n_samples"] = data.n_samples();
    j["coefficients"] = coefficient_file;
    return j;
}

MFDataset read_dataset_manifest(const fs::path& path) {
    const json j = read_json(path);
    try {
        std::vector<BasisSystem> bases;
        for (const auto& b : j.at("bases")) bases.push_back(basis_from_json(b));
        const auto names = j.at("names").get<std::vector<std::string>>();
        const fs::path coef_path = path.parent_path() / j.at("coefficients").get<std::string>();
        const std::string text = read_text(coef_path);
        std::vector<std::vector<double>> rows;
        std::istringstream in(text);
        std::string line;
        bool header = false;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto l = trim(line);
            if (l.empty() || l.front() == '#') continue;
            if (!header) {
                header = true;
                continue;
            }
            const auto fields = split(l, ',');
            std::vector<double> row;
            for (std::size_t f = 1; f < fields.size(); ++f) row.push_back(parse_number(trim(fields[f]), line_no, "coefficient"));
            rows.push_back(std::move(row));
        }
        Eigen::Index total = 0;
        for (const auto& b : bases) total += b.dimension();
        Eigen::MatrixXd coeffs(static_cast<Eigen::Index>(rows.size()), total);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (static_cast<Eigen::Index>(rows[i].size()) != total) {
                throw Error(ErrorCode::Parse, coef_path.string() + ": row " + std::to_string(i + 1) + " has " +
                                                  std::to_string(rows[i].size()) + " coefficients, expected " +
                                                  std::to_string(total));
            }
            for (Eigen::Index c = 0; c < total; ++c) coeffs(static_cast<Eigen::Index>(i), c) = rows[i][c];
        }
        return MFDataset(std::move(bases), std::move(coeffs), names);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
    }
}

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw Error(ErrorCode::InvalidConfig, "field '" + field + "': " + what);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) field_error(where, "expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) field_error(where.empty() ? key : where + "." + key, "unknown field");
    }
}

template <class T>
T get_field(const json& j, const std::string& key, T fallback, const std::string& where = "") {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        field_error(where.empty() ? key : where + "." + key, "wrong type");
    }
}

Interval domain_of(const json& spec) {
    if (!spec.contains("domain")) return Interval(0.0, 1.0);
    const auto& d = spec.at("domain");
    if (!d.is_array() || d.size() != 2 || !d[0].is_number() || !d[1].is_number()) {
        field_error("domain", "expected [lower, upper]");
    }
    try {
        return Interval(d[0].get<double>(), d[1].get<double>());
    } catch (const Error& e) {
        field_error("domain", e.what());
    }
}

}  // namespace

BasisSystem basis_from_spec(const json& spec) {
    check_keys(spec, {"kind", "n_basis", "order", "domain", "name"}, "basis");
    const auto kind = get_field<std::string>(spec, "kind", "bspline", "basis");
    if (!spec.contains("n_basis")) field_error("basis.n_basis", "required");
    const int n = get_field<int>(spec, "n_basis", 0, "basis");
    const Interval dom = domain_of(spec);
    if (kind == "bspline") return BasisSystem::bspline(dom, n, get_field<int>(spec, "order", 4, "basis"));
    if (kind == "fourier") return BasisSystem::fourier(dom, n);
    if (kind == "sine") return BasisSystem::sine(dom, n);
    field_error("basis.kind", "expected bspline, fourier or sine, got '" + kind + "'");
}

std::vector<BasisSystem> bases_for(const GridObservations& obs, const json& basis_spec) {
    std::vector<BasisSystem> out;
    const std::size_t p = obs.n_variables();
    if (basis_spec.is_array()) {
        if (basis_spec.size() != p) {
            throw Error(ErrorCode::DimensionMismatch, std::to_string(basis_spec.size()) + " bases declared for " +
                                                          std::to_string(p) + " variables");
        }
        for (const auto& s : basis_spec) out.push_back(basis_from_spec(s));
    } else if (basis_spec.is_object() && basis_spec.contains("n_basis")) {
        for (std::size_t j = 0; j < p; ++j) out.push_back(basis_from_spec(basis_spec));
    } else if (basis_spec.is_object()) {
        for (const auto& v : obs.variables) {
            if (!basis_spec.contains(v.name)) field_error(v.name, "no basis declared for this variable");
            out.push_back(basis_from_spec(basis_spec.at(v.name)));
        }
        if (basis_spec.size() != p) field_error("bases", "declares variables absent from the data");
    } else {
        field_error("bases", "expected an array or object");
    }
    return out;
}

SimConfig sim_config_from_json(const json& j) {
    check_keys(j, {"n", "M", "theta", "sigma1", "sigma2", "sigma", "rho", "grid1", "grid2", "mean_mode",
                   "cluster_matrix", "seed"},
               "");
    SimConfig c;
    c.n = get_field(j, "n", c.n);
    c.M = get_field(j, "M", c.M);
    c.theta = get_field(j, "theta", c.theta);
    if (j.contains("sigma")) c.sigma1 = c.sigma2 = get_field(j, "sigma", 0.0);
    c.sigma1 = get_field(j, "sigma1", c.sigma1);
    c.sigma2 = get_field(j, "sigma2", c.sigma2);
    c.rho = get_field(j, "rho", c.rho);
    c.grid1 = get_field(j, "grid1", c.grid1);
    c.grid2 = get_field(j, "grid2", c.grid2);
    c.seed = get_field<std::uint64_t>(j, "seed", c.seed);
    const auto mode = get_field<std::string>(j, "mean_mode", "zero");
    if (mode == "zero") {
        c.mean_mode = MeanMode::Zero;
    } else if (mode == "clusters") {
        c.mean_mode = MeanMode::Clusters;
    } else {
        field_error("mean_mode", "expected zero or clusters, got '" + mode + "'");
    }
    if (j.contains("cluster_matrix")) {
        const auto rows = get_field<std::vector<std::vector<double>>>(j, "cluster_matrix", {});
        if (rows.size() != 3) field_error("cluster_matrix", "expected 3x3");
        for (int r = 0; r < 3; ++r) {
            if (rows[r].size() != 3) field_error("cluster_matrix", "expected 3x3");
            for (int col = 0; col < 3; ++col) c.cluster_matrix(r, col) = rows[r][col];
        }
    }
    try {
        c.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    return c;
}

json sim_config_to_json(const SimConfig& c) {
    json j;
    j["n"] = c.n;
    j["M"] = c.M;
    j["theta"] = c.theta;
    j["sigma1"] = c.sigma1;
    j["sigma2"] = c.sigma2;
    j["rho"] = c.rho;
    j["grid1"] = c.grid1;
    j["grid2"] = c.grid2;
    j["mean_mode"] = c.mean_mode == MeanMode::Zero ? "zero" : "clusters";
    json a = json::array();
    for (int r = 0; r < 3; ++r) a.push_back({c.cluster_matrix(r, 0), c.cluster_matrix(r, 1), c.cluster_matrix(r, 2)});
    j["cluster_matrix"] = a;
    j["seed"] = c.seed;
    return j;
}

CvConfig cv_config_from_json(const json& j, std::size_t n_variables) {
    check_keys(j, {"folds", "J", "grid", "search", "sweeps", "seed"}, "cv");
    CvConfig c;
    c.folds = get_field(j, "folds", c.folds, "cv");
    c.J = get_field(j, "J", c.J, "cv");
    c.sweeps = get_field(j, "sweeps", c.sweeps, "cv");
    c.seed = get_field<std::uint64_t>(j, "seed", c.seed, "cv");
    const auto search = get_field<std::string>(j, "search", "coordinate_wise", "cv");
    if (search == "full_grid") {
        c.search = SearchMode::FullGrid;
    } else if (search == "coordinate_wise") {
        c.search = SearchMode::CoordinateWise;
    } else if (search == "shared") {
        c.search = SearchMode::Shared;
    } else {
        field_error("cv.search", "expected full_grid, coordinate_wise or shared, got '" + search + "'");
    }
    if (!j.contains("grid")) {
        c.grid = CvConfig::default_grid(n_variables);
    } else if (j.at("grid").is_array() && !j.at("grid").empty() && j.at("grid")[0].is_number()) {
        c.grid.assign(n_variables, get_field<std::vector<double>>(j, "grid", {}, "cv"));
    } else {
        c.grid = get_field<std::vector<std::vector<double>>>(j, "grid", {}, "cv");
    }
    return c;
}

json cv_config_to_json(const CvConfig& c) {
    static const char* names[] = {"full_grid", "coordinate_wise", "shared"};
    return json{{"folds", c.folds},
                {"J", c.J},
                {"grid", c.grid},
                {"search", names[static_cast<int>(c.search)]},
                {"sweeps", c.sweeps},
                {"seed", c.seed}};
}

json truth_json(const SimConfig& cfg, const SimTruth& truth) {
    json j;
    j["config"] = sim_config_to_json(cfg);
    j["eigenvalues"] = std::vector<double>(truth.eigenvalues.data(), truth.eigenvalues.data() + truth.eigenvalues.size());
    j["labels"] = truth.labels;
    j["components"] = {{"x1", "sin(m*pi*t)"}, {"x2", "sin((2m-1)*pi*t/2)"}};
    return j;
}

CsvTable eigenvalue_table(const RemfpcaModel& model, const std::string& spec_hash) {
    CsvTable t(spec_hash, {"component", "eigenvalue"});
    for (Eigen::Index l = 0; l < model.n_components(); ++l) {
        t.add_row({std::to_string(l + 1), format_double(model.eigenvalues[l])});
    }
    return t;
}

CsvTable scores_table(const Eigen::MatrixXd& scores, const std::vector<std::string>& ids, const std::string& spec_hash) {
    std::vector<std::string> header{"sample_id"};
    for (Eigen::Index l = 0; l < scores.cols(); ++l) header.push_back("pc" + std::to_string(l + 1));
    CsvTable t(spec_hash, header);
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        std::vector<std::string> row{i < static_cast<Eigen::Index>(ids.size()) ? ids[i] : std::to_string(i)};
        for (Eigen::Index l = 0; l < scores.cols(); ++l) row.push_back(format_double(scores(i, l)));
        t.add_row(std::move(row));
    }
    return t;
}

CsvTable pc_table(const RemfpcaModel& model, int points_per_variable, const std::string& spec_hash) {
    if (points_per_variable < 2) throw Error(ErrorCode::InvalidConfig, "need at least 2 evaluation points");
    std::vector<std::vector<double>> points;
    for (const auto& b : model.bases) {
        std::vector<double> p(points_per_variable);
        for (int k = 0; k < points_per_variable; ++k) {
            p[k] = b.domain().lower() + b.domain().width() * k / (points_per_variable - 1);
        }
        p.back() = b.domain().upper();
        points.push_back(std::move(p));
    }
    const auto raw = eval_pcs(model, points, false);
    const auto normed = eval_pcs(model, points, true);
    CsvTable t(spec_hash, {"variable", "t", "component", "raw", "h_normalized"});
    for (std::size_t j = 0; j < model.bases.size(); ++j) {
        const std::string name = j < model.names.size() ? model.names[j] : "x" + std::to_string(j + 1);
        for (Eigen::Index l = 0; l < model.n_components(); ++l) {
            for (int k = 0; k < points_per_variable; ++k) {
                t.add_row({name, format_double(points[j][k]), std::to_string(l + 1), format_double(raw[j](k, l)),
                           format_double(normed[j](k, l))});
            }
        }
    }
    return t;
}

CsvTable cv_table(const CvResult& result, std::size_t p, const std::string& spec_hash) {
    std::vector<std::string> header;
    for (std::size_t j = 0; j < p; ++j) header.push_back("alpha_" + std::to_string(j + 1));
    header.push_back("fold");
    header.push_back("loss");
    CsvTable t(spec_hash, header);
    for (const auto& r : result.table) {
        std::vector<std::string> row;
        for (double a : r.alpha.values()) row.push_back(format_double(a));
        row.push_back(std::to_string(r.fold));
        row.push_back(format_double(r.loss));
        t.add_row(std::move(row));
    }
    return t;
}

CsvTable cluster_table(const ClusterEval& eval, const std::vector<std::string>& ids, const std::string& spec_hash) {
    CsvTable t(spec_hash, {"sample_id", "label"});
    for (std::size_t i = 0; i < eval.labels.size(); ++i) {
        t.add_row({i < ids.size() ? ids[i] : std::to_string(i), std::to_string(eval.labels[i])});
    }
    return t;
}

}  // namespace remfpca::io
