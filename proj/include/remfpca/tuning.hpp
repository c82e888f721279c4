#pragma once

#include <cstdint>
#include <vector>

#include "remfpca/core.hpp"

namespace remfpca {

enum class SearchMode {
    FullGrid,        ///< Cartesian product of the per-variable grids
    CoordinateWise,  ///< sweep one variable at a time, others held fixed
    Shared,          ///< one scalar alpha for every variable, taken from grid[0]
};

struct CvConfig {
    int folds = 5;
    int J = 3;
    /// One sorted, positive grid per variable.
    std::vector<std::vector<double>> grid;
    SearchMode search = SearchMode::CoordinateWise;
    int sweeps = 1;
    std::uint64_t seed = 1;

    /// Default grid: 11 log-spaced points 1e-8 ... 1e2 for every variable.
    static std::vector<std::vector<double>> default_grid(std::size_t p);
    void validate(const MFDataset& data) const;
};

struct CvRecord {
    AlphaVector alpha;
    int fold = 0;
    double loss = 0.0;  ///< held-out MRAE; +inf when the fit failed
};

struct CvResult {
    AlphaVector best_alpha;
    double best_loss = 0.0;
    std::vector<CvRecord> table;
};

/// Fold index of every sample: a seeded permutation dealt round-robin.
std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed);

/// Mean held-out MRAE at truncation J over the folds of `cfg`. Throws the
/// underlying error if a fold cannot be fitted.
double cv_loss(const MFDataset& data, const AlphaVector& alpha, const CvConfig& cfg,
               std::vector<CvRecord>* records = nullptr);

/// Picks the candidate with the smallest mean held-out MRAE; exact ties go to
/// the lexicographically smallest alpha.
CvResult cross_validate(const MFDataset& data, const CvConfig& cfg);

}  // namespace remfpca
