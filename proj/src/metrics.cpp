#include "remfpca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "remfpca/error.hpp"
#include "remfpca/quadrature.hpp"

namespace remfpca {

double err_lambda(double estimate, double truth) {
    if (truth == 0.0) throw Error(ErrorCode::Domain, "relative eigenvalue error undefined for a zero true eigenvalue");
    return std::abs(estimate - truth) / std::abs(truth);
}

namespace {

struct NodeSet {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Breakpoints at every distinct knot (B-splines) or 64 equal pieces, each
// split into 4 panels of a 10-point Gauss-Legendre rule.
NodeSet quadrature_nodes(const BasisSystem& basis) {
    std::vector<double> breaks;
    if (basis.kind() == BasisKind::BSpline) {
        breaks = basis.knots();
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    } else {
        const int pieces = 64;
        for (int i = 0; i <= pieces; ++i) {
            breaks.push_back(basis.domain().lower() + basis.domain().width() * i / pieces);
        }
    }
    const GaussRule rule = gauss_legendre(10);
    const int sub = 4;
    NodeSet set;
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
        const double h = (breaks[b + 1] - breaks[b]) / sub;
        for (int s = 0; s < sub; ++s) {
            const double mid = breaks[b] + (s + 0.5) * h;
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                set.nodes.push_back(mid + 0.5 * h * rule.nodes[q]);
                set.weights.push_back(0.5 * h * rule.weights[q]);
            }
        }
    }
    return set;
}

}  // namespace

double err_psi(const Eigen::VectorXd& b, const std::vector<BasisSystem>& bases, const MultiFunction& truth) {
    if (truth.size() != bases.size()) {
        throw Error(ErrorCode::DimensionMismatch, "true function has " + std::to_string(truth.size()) +
                                                      " components but the estimate has " +
                                                      std::to_string(bases.size()));
    }
    const Eigen::MatrixXd g = block_gram(bases);
    if (b.size() != g.rows()) throw Error(ErrorCode::DimensionMismatch, "coefficient vector does not match the bases");
    const double norm = std::sqrt(b.dot(g * b));
    if (!(norm > 0.0)) throw Error(ErrorCode::Domain, "estimated component has zero norm");
    const Eigen::VectorXd normalized = b / norm;

    struct Sampled {
        Eigen::VectorXd estimate, truth, weights;
    };
    std::vector<Sampled> sampled;
    double cross = 0.0;
    Eigen::Index offset = 0;
    for (std::size_t j = 0; j < bases.size(); ++j) {
        const NodeSet set = quadrature_nodes(bases[j]);
        Sampled s;
        s.estimate = bases[j].evaluate(set.nodes) * normalized.segment(offset, bases[j].dimension());
        s.truth.resize(set.nodes.size());
        for (std::size_t q = 0; q < set.nodes.size(); ++q) s.truth[q] = truth[j](set.nodes[q]);
        s.weights = Eigen::Map<const Eigen::VectorXd>(set.weights.data(), static_cast<Eigen::Index>(set.weights.size()));
        cross += (s.weights.array() * s.estimate.array() * s.truth.array()).sum();
        sampled.push_back(std::move(s));
        offset += bases[j].dimension();
    }
    const double sign = cross < 0.0 ? -1.0 : 1.0;
    double total = 0.0;
    for (const auto& s : sampled) total += (s.weights.array() * (s.estimate - sign * s.truth).array().square()).sum();
    return std::sqrt(total);
}

Eigen::VectorXd relative_errors(const MFDataset& data, const MFDataset& reconstructed) {
    if (!data.same_bases(reconstructed) || data.n_samples() != reconstructed.n_samples()) {
        throw Error(ErrorCode::DimensionMismatch, "reconstruction does not match the dataset layout");
    }
    const Eigen::MatrixXd g = data.gram();
    const Eigen::MatrixXd delta = reconstructed.coeffs() - data.coeffs();
    const Eigen::VectorXd num = ((delta * g).array() * delta.array()).rowwise().sum().max(0.0).sqrt();
    const Eigen::VectorXd den = ((data.coeffs() * g).array() * data.coeffs().array()).rowwise().sum().max(0.0).sqrt();
    for (Eigen::Index i = 0; i < den.size(); ++i) {
        if (!(den[i] > 0.0)) throw Error(ErrorCode::Domain, "sample " + std::to_string(i) + " has zero norm");
    }
    return num.cwiseQuotient(den);
}

double mrae(const MFDataset& data, const MFDataset& reconstructed) {
    return relative_errors(data, reconstructed).mean();
}

Eigen::MatrixXd euclidean_distances(const Eigen::MatrixXd& points) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
        }
    }
    return d;
}

namespace {

constexpr std::uint64_t kExactSubsetLimit = 1000;

bool binomial_at_most(Eigen::Index n, int k, std::uint64_t limit) {
    std::uint64_t c = 1;
    for (int i = 1; i <= k; ++i) {
        c = c * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
        if (c > limit) return false;
    }
    return true;
}

struct Assignment {
    std::vector<int> slot;
    Eigen::VectorXd nearest;
    Eigen::VectorXd second;
    double objective = 0.0;
};

Assignment assign(const Eigen::MatrixXd& dist, const std::vector<Eigen::Index>& medoids) {
    const Eigen::Index n = dist.rows();
    Assignment a;
    a.slot.assign(n, 0);
    a.nearest.resize(n);
    a.second.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double best = std::numeric_limits<double>::infinity();
        double runner = std::numeric_limits<double>::infinity();
        int best_slot = 0;
        for (std::size_t m = 0; m < medoids.size(); ++m) {
            const double v = dist(medoids[m], j);
            if (v < best) {
                runner = best;
                best = v;
                best_slot = static_cast<int>(m);
            } else if (v < runner) {
                runner = v;
            }
        }
        // a medoid always belongs to its own cluster, even among duplicates
        for (std::size_t m = 0; m < medoids.size(); ++m) {
            if (medoids[m] == j) best_slot = static_cast<int>(m);
        }
        a.slot[j] = best_slot;
        a.nearest[j] = best;
        a.second[j] = runner;
        a.objective += best;
    }
    return a;
}

}  // namespace

ClusterEval kmedoids(const Eigen::MatrixXd& points, int k, std::uint64_t /*seed*/) {
    const Eigen::Index n = points.rows();
    if (k < 1 || k > n) {
        throw Error(ErrorCode::InvalidK, "k-medoids needs 1 <= k <= n (k=" + std::to_string(k) + ", n=" +
                                             std::to_string(n) + ")");
    }
    const Eigen::MatrixXd dist = euclidean_distances(points);

    // BUILD
    std::vector<Eigen::Index> medoids;
    std::vector<bool> is_medoid(n, false);
    {
        Eigen::Index first = 0;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double total = dist.row(i).sum();
            if (total < best) {
                best = total;
                first = i;
            }
        }
        medoids.push_back(first);
        is_medoid[first] = true;
    }
    Eigen::VectorXd nearest = dist.row(medoids.front()).transpose();
    while (static_cast<int>(medoids.size()) < k) {
        Eigen::Index pick = -1;
        double best_gain = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (is_medoid[i]) continue;
            double gain = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) gain += std::max(0.0, nearest[j] - dist(i, j));
            if (gain > best_gain) {
                best_gain = gain;
                pick = i;
            }
        }
        medoids.push_back(pick);
        is_medoid[pick] = true;
        nearest = nearest.cwiseMin(dist.col(pick));
    }

    ClusterEval out;
    Assignment current = assign(dist, medoids);
    out.objective_trace.push_back(current.objective);

    // SWAP
    for (;;) {
        double best_delta = 0.0;
        std::size_t best_slot = 0;
        Eigen::Index best_candidate = -1;
        for (std::size_t m = 0; m < medoids.size(); ++m) {
            for (Eigen::Index h = 0; h < n; ++h) {
                if (is_medoid[h]) continue;
                double delta = 0.0;
                for (Eigen::Index j = 0; j < n; ++j) {
                    const double dh = dist(j, h);
                    if (current.slot[j] == static_cast<int>(m)) {
                        delta += std::min(dh, current.second[j]) - current.nearest[j];
                    } else {
                        delta += std::min(dh, current.nearest[j]) - current.nearest[j];
                    }
                }
                if (delta < best_delta) {
                    best_delta = delta;
                    best_slot = m;
                    best_candidate = h;
                }
            }
        }
        if (best_candidate < 0 || best_delta > -1e-12 * std::max(1.0, current.objective)) break;
        is_medoid[medoids[best_slot]] = false;
        medoids[best_slot] = best_candidate;
        is_medoid[best_candidate] = true;
        current = assign(dist, medoids);
        out.objective_trace.push_back(current.objective);
        ++out.swaps;
    }

    // tiny problems: finish at the best subset overall, itself a SWAP fixed point
    if (binomial_at_most(n, k, kExactSubsetLimit)) {
        std::vector<Eigen::Index> best = medoids;
        double best_obj = current.objective;
        std::vector<Eigen::Index> pick(k);
        for (int i = 0; i < k; ++i) pick[i] = i;
        for (;;) {
            double total = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                double m = std::numeric_limits<double>::infinity();
                for (Eigen::Index c : pick) m = std::min(m, dist(j, c));
                total += m;
            }
            if (total < best_obj - 1e-12 * std::max(1.0, best_obj)) {
                best_obj = total;
                best = pick;
            }
            int i = k - 1;
            while (i >= 0 && pick[i] == n - k + i) --i;
            if (i < 0) break;
            ++pick[i];
            for (int r = i + 1; r < k; ++r) pick[r] = pick[r - 1] + 1;
        }
        if (best != medoids) {
            medoids = best;
            current = assign(dist, medoids);
            out.objective_trace.push_back(current.objective);
        }
    }

    out.labels = current.slot;
    out.medoid_indices = medoids;
    out.objective = current.objective;
    if (k >= 2) {
        const Silhouette s = silhouette(points, out.labels);
        out.silhouette_values = s.values;
        out.silhouette_mean = s.mean;
    }
    return out;
}

Silhouette silhouette(const Eigen::MatrixXd& points, std::span<const int> labels) {
    const Eigen::Index n = points.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw Error(ErrorCode::DimensionMismatch, "one label per point required");
    }
    std::map<int, int> remap;
    for (int l : labels) remap.emplace(l, static_cast<int>(remap.size()));
    if (remap.size() < 2) throw Error(ErrorCode::InvalidConfig, "silhouette needs at least two clusters");
    const int c = static_cast<int>(remap.size());
    std::vector<int> cluster(n);
    std::vector<int> sizes(c, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        cluster[i] = remap[labels[i]];
        ++sizes[cluster[i]];
    }
    const Eigen::MatrixXd dist = euclidean_distances(points);

    Silhouette out;
    out.values = Eigen::VectorXd::Zero(n);
    std::vector<double> sums(c);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (sizes[cluster[i]] == 1) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) sums[cluster[j]] += dist(i, j);
        const double a = sums[cluster[i]] / (sizes[cluster[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int q = 0; q < c; ++q) {
            if (q != cluster[i]) b = std::min(b, sums[q] / sizes[q]);
        }
        const double denom = std::max(a, b);
        out.values[i] = denom > 0.0 ? (b - a) / denom : 0.0;
    }
    out.mean = out.values.mean();
    return out;
}

namespace {

struct Contingency {
    std::map<std::pair<int, int>, std::int64_t> cells;
    std::map<int, std::int64_t> rows;
    std::map<int, std::int64_t> cols;
    std::int64_t n = 0;
};

Contingency contingency(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "label vectors differ in length");
    // labels renumbered by first appearance so relabelings give the same table
    std::map<int, int> ra, rb;
    Contingency t;
    t.n = static_cast<std::int64_t>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const int x = ra.emplace(a[i], static_cast<int>(ra.size())).first->second;
        const int y = rb.emplace(b[i], static_cast<int>(rb.size())).first->second;
        ++t.cells[{x, y}];
        ++t.rows[x];
        ++t.cols[y];
    }
    return t;
}

double pairs(std::int64_t x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }

}  // namespace

double ari(std::span<const int> a, std::span<const int> b) {
    const Contingency t = contingency(a, b);
    if (t.n < 2) return 1.0;
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, count] : t.cells) index += pairs(count);
    for (const auto& [key, count] : t.rows) sum_rows += pairs(count);
    for (const auto& [key, count] : t.cols) sum_cols += pairs(count);
    const double expected = sum_rows * sum_cols / pairs(t.n);
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

double nmi(std::span<const int> a, std::span<const int> b) {
    const Contingency t = contingency(a, b);
    if (t.n == 0) return 1.0;
    const double n = static_cast<double>(t.n);
    auto entropy = [n](const std::map<int, std::int64_t>& counts) {
        double h = 0.0;
        for (const auto& [key, count] : counts) {
            const double p = count / n;
            h -= p * std::log(p);
        }
        return h;
    };
    const double ha = entropy(t.rows);
    const double hb = entropy(t.cols);
    if (ha == 0.0 && hb == 0.0) return 1.0;
    // identical partitions up to relabeling
    if (t.cells.size() == t.rows.size() && t.cells.size() == t.cols.size()) return 1.0;
    double mi = 0.0;
    for (const auto& [key, count] : t.cells) {
        const double pij = count / n;
        mi += pij * std::log(n * count / (static_cast<double>(t.rows.at(key.first)) * t.cols.at(key.second)));
    }
    return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

int choose_k_by_silhouette(const Eigen::MatrixXd& points, std::span<const int> k_range, std::uint64_t seed,
                           std::vector<double>* mean_silhouettes) {
    if (k_range.empty()) throw Error(ErrorCode::InvalidConfig, "empty range of cluster counts");
    const Eigen::Index n = points.rows();
    int best_k = -1;
    double best = -std::numeric_limits<double>::infinity();
    if (mean_silhouettes) mean_silhouettes->clear();
    for (int k : k_range) {
        if (k < 2 || k > n - 1) {
            throw Error(ErrorCode::InvalidConfig, "cluster count " + std::to_string(k) + " outside [2, n-1]");
        }
        const double s = kmedoids(points, k, seed).silhouette_mean;
        if (mean_silhouettes) mean_silhouettes->push_back(s);
        const bool tie = std::abs(s - best) <= 1e-12;
        if (best_k < 0 || (!tie && s > best) || (tie && k < best_k)) {
            best = s;
            best_k = k;
        }
    }
    return best_k;
}

}  // namespace remfpca
