#include "remfpca/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include "remfpca/error.hpp"
#include "remfpca/metrics.hpp"
#include "remfpca/random.hpp"

namespace remfpca {

std::vector<std::vector<double>> CvConfig::default_grid(std::size_t p) {
    std::vector<double> grid;
    for (int e = -8; e <= 2; ++e) grid.push_back(std::pow(10.0, e));
    return std::vector<std::vector<double>>(p, grid);
}

void CvConfig::validate(const MFDataset& data) const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "cross-validation: " + what); };
    const Eigen::Index n = data.n_samples();
    if (folds < 2) fail("folds must be >= 2");
    if (folds > n) fail("folds (" + std::to_string(folds) + ") exceed the sample count (" + std::to_string(n) + ")");
    if (sweeps < 1) fail("at least one sweep is required");
    if (search == SearchMode::Shared ? grid.empty() : grid.size() != data.n_variables()) {
        fail("one grid per variable required");
    }
    for (const auto& g : grid) {
        if (g.empty()) fail("grids must be nonempty");
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!(g[i] > 0.0) || !std::isfinite(g[i])) fail("grid entries must be finite and > 0");
            if (i > 0 && !(g[i] > g[i - 1])) fail("grids must be strictly increasing");
        }
    }
    // smallest training fold has n - ceil(n / folds) samples
    const Eigen::Index smallest_train = n - (n + folds - 1) / folds;
    if (J < 1 || J > smallest_train - 1 || J > data.total_dimension()) {
        fail("J=" + std::to_string(J) + " must lie in [1, " +
             std::to_string(std::min(smallest_train - 1, data.total_dimension())) + "]");
    }
}

std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed) {
    Rng rng(seed);
    const auto perm = rng.permutation(static_cast<std::size_t>(n));
    std::vector<int> fold(n);
    for (std::size_t pos = 0; pos < perm.size(); ++pos) fold[perm[pos]] = static_cast<int>(pos % folds);
    return fold;
}

double cv_loss(const MFDataset& data, const AlphaVector& alpha, const CvConfig& cfg, std::vector<CvRecord>* records) {
    const auto fold = fold_assignment(data.n_samples(), cfg.folds, cfg.seed);
    double total = 0.0;
    for (int f = 0; f < cfg.folds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (Eigen::Index i = 0; i < data.n_samples(); ++i) (fold[i] == f ? test : train).push_back(i);
        const MFDataset train_set = data.select_rows(train);
        const MFDataset test_set = data.select_rows(test);
        const RemfpcaModel model = fit(train_set, alpha, cfg.J);
        const double loss = mrae(test_set, reconstruct(model, test_set, cfg.J));
        if (records) records->push_back({alpha, f, loss});
        total += loss;
    }
    return total / cfg.folds;
}

namespace {

class Search {
public:
    Search(const MFDataset& data, const CvConfig& cfg) : data_(data), cfg_(cfg) {}

    double evaluate(const AlphaVector& alpha) {
        if (const auto it = cache_.find(alpha); it != cache_.end()) return it->second;
        std::vector<CvRecord> records;
        double loss = std::numeric_limits<double>::infinity();
        try {
            loss = cv_loss(data_, alpha, cfg_, &records);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Factorization) throw;
            records.clear();
            for (int f = 0; f < cfg_.folds; ++f) records.push_back({alpha, f, loss});
        }
        table_.insert(table_.end(), records.begin(), records.end());
        cache_.emplace(alpha, loss);
        if (std::isfinite(loss) && (!best_ || loss < best_loss_ || (loss == best_loss_ && alpha < *best_))) {
            best_ = alpha;
            best_loss_ = loss;
        }
        return loss;
    }

    CvResult finish() {
        if (!best_) throw Error(ErrorCode::Tuning, "no smoothing-parameter candidate could be fitted");
        return {*best_, best_loss_, std::move(table_)};
    }

private:
    const MFDataset& data_;
    const CvConfig& cfg_;
    std::map<AlphaVector, double> cache_;
    std::vector<CvRecord> table_;
    std::optional<AlphaVector> best_;
    double best_loss_ = std::numeric_limits<double>::infinity();
};

}  // namespace

CvResult cross_validate(const MFDataset& data, const CvConfig& cfg) {
    cfg.validate(data);
    Search search(data, cfg);
    const std::size_t p = data.n_variables();

    switch (cfg.search) {
        case SearchMode::Shared:
            for (double v : cfg.grid.front()) search.evaluate(AlphaVector::uniform(p, v));
            break;
        case SearchMode::FullGrid: {
            std::vector<std::size_t> idx(p, 0);
            bool done = false;
            while (!done) {
                std::vector<double> values(p);
                for (std::size_t j = 0; j < p; ++j) values[j] = cfg.grid[j][idx[j]];
                search.evaluate(AlphaVector(values));
                done = true;
                for (std::size_t j = p; j-- > 0;) {
                    if (++idx[j] < cfg.grid[j].size()) {
                        done = false;
                        break;
                    }
                    idx[j] = 0;
                }
            }
            break;
        }
        case SearchMode::CoordinateWise: {
            std::vector<double> current(p);
            for (std::size_t j = 0; j < p; ++j) current[j] = cfg.grid[j].front();
            for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
                for (std::size_t j = 0; j < p; ++j) {
                    double best_value = current[j];
                    double best_loss = std::numeric_limits<double>::infinity();
                    for (double v : cfg.grid[j]) {
                        auto candidate = current;
                        candidate[j] = v;
                        const double loss = search.evaluate(AlphaVector(candidate));
                        if (loss < best_loss) {
                            best_loss = loss;
                            best_value = v;
                        }
                    }
                    current[j] = best_value;
                }
            }
            break;
        }
    }
    return search.finish();
}

}  // namespace remfpca
