#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "remfpca/core.hpp"
#include "remfpca/fundata.hpp"
#include "remfpca/metrics.hpp"
#include "remfpca/simulate.hpp"
#include "remfpca/tuning.hpp"

namespace remfpca::io {

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string content_hash(std::string_view text);

/// Shortest round-trip decimal form of a double ("%.17g").
std::string format_double(double v);

/// Small CSV builder. The first line is always "# spec_hash=<hash>", followed
/// by the header row.
class CsvTable {
public:
    CsvTable(std::string spec_hash, std::vector<std::string> header);

    void add_row(std::vector<std::string> cells);
    std::string str() const;
    void write(const std::filesystem::path& path) const;

private:
    std::string spec_hash_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text(const std::filesystem::path& path, std::string_view text);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Long format with header `sample_id,variable,t,value`; lines starting with
/// '#' are comments. Variables and samples keep their first-seen order and
/// every sample must be observed on the same grid per variable.
GridObservations parse_long_csv(std::string_view text);
GridObservations read_long_csv(const std::filesystem::path& path);
std::string long_csv(const GridObservations& obs, const std::string& spec_hash);

/// `sample_id,<var>_1..<var>_d,...` coefficient export.
CsvTable coefficient_table(const MFDataset& data, const std::string& spec_hash);

/// Dataset manifest: variable names, basis definitions and the coefficient
/// file reference (relative to the manifest).
nlohmann::json dataset_manifest(const MFDataset& data, const std::string& coefficient_file);
MFDataset read_dataset_manifest(const std::filesystem::path& path);

/// Reorders the declared bases to match the observation variables. The description
/// is either an array (matched by position) or an object keyed by variable
/// name; a single basis object applies to every variable.
std::vector<BasisSystem> bases_for(const GridObservations& obs, const nlohmann::json& basis_spec);

/// Parses one basis description, e.g. {"kind":"bspline","n_basis":15,"order":4,"domain":[0,1]}.
BasisSystem basis_from_spec(const nlohmann::json& spec);

SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json sim_config_to_json(const SimConfig& cfg);

CvConfig cv_config_from_json(const nlohmann::json& j, std::size_t n_variables);
nlohmann::json cv_config_to_json(const CvConfig& cfg);

nlohmann::json truth_json(const SimConfig& cfg, const SimTruth& truth);

CsvTable eigenvalue_table(const RemfpcaModel& model, const std::string& spec_hash);
CsvTable scores_table(const Eigen::MatrixXd& scores, const std::vector<std::string>& ids,
                      const std::string& spec_hash);
/// Long table `variable,t,component,raw,h_normalized` on each basis domain.
CsvTable pc_table(const RemfpcaModel& model, int points_per_variable, const std::string& spec_hash);
CsvTable cv_table(const CvResult& result, std::size_t p, const std::string& spec_hash);
CsvTable cluster_table(const ClusterEval& eval, const std::vector<std::string>& ids, const std::string& spec_hash);

}  // namespace remfpca::io
