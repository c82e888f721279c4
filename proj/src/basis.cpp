#include "remfpca/basis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "remfpca/error.hpp"
#include "remfpca/quadrature.hpp"

namespace remfpca {

namespace {

constexpr double kPi = std::numbers::pi;

// Nonzero B-spline values and derivatives at x on knot span `span`
// (Piegl & Tiller, algorithm A2.3). ders[r][j] holds the r-th derivative of
// N_{span - degree + j}.
std::vector<std::vector<double>> bspline_derivatives(const std::vector<double>& knots, int span, int degree,
                                                     double x, int n_ders) {
    const int p = degree;
    std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
    std::vector<double> left(p + 1, 0.0), right(p + 1, 0.0);
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    std::vector<std::vector<double>> ders(n_ders + 1, std::vector<double>(p + 1, 0.0));
    for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];

    std::vector<std::vector<double>> a(2, std::vector<double>(p + 1, 0.0));
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= n_ders && k <= p; ++k) {
            double d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::swap(s1, s2);
        }
    }
    double factor = p;
    for (int k = 1; k <= n_ders && k <= p; ++k) {
        for (int j = 0; j <= p; ++j) ders[k][j] *= factor;
        factor *= (p - k);
    }
    return ders;
}

int find_span(const std::vector<double>& knots, int dimension, int degree, double x) {
    if (x >= knots[dimension]) return dimension - 1;
    const auto it = std::upper_bound(knots.begin() + degree, knots.begin() + dimension + 1, x);
    return static_cast<int>(it - knots.begin()) - 1;
}

std::uint64_t fnv1a(const std::string& text, std::uint64_t hash = 1469598103934665603ULL) {
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

}  // namespace

Interval::Interval(double lower, double upper) : lower_(lower), upper_(upper) {
    if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
        throw Error(ErrorCode::InvalidConfig, "interval requires finite lower < upper");
    }
}

BasisSystem::BasisSystem(BasisKind kind, Interval domain, int dimension, int order, std::vector<double> knots)
    : kind_(kind), domain_(domain), dimension_(dimension), order_(order), knots_(std::move(knots)) {
    build_matrices();
}

BasisSystem BasisSystem::bspline(Interval domain, int n_basis, int order) {
    if (order < 2) throw Error(ErrorCode::InvalidConfig, "B-spline order must be at least 2");
    if (n_basis < order) {
        throw Error(ErrorCode::InvalidConfig, "B-spline basis needs n_basis >= order (got n_basis=" +
                                                  std::to_string(n_basis) + ", order=" + std::to_string(order) + ")");
    }
    const int n_interior = n_basis - order;
    std::vector<double> knots;
    knots.reserve(n_basis + order);
    for (int i = 0; i < order; ++i) knots.push_back(domain.lower());
    for (int i = 1; i <= n_interior; ++i) {
        knots.push_back(domain.lower() + domain.width() * static_cast<double>(i) / (n_interior + 1));
    }
    for (int i = 0; i < order; ++i) knots.push_back(domain.upper());
    return BasisSystem(BasisKind::BSpline, domain, n_basis, order, std::move(knots));
}

BasisSystem BasisSystem::fourier(Interval domain, int n_basis) {
    if (n_basis < 1) throw Error(ErrorCode::InvalidConfig, "Fourier basis needs n_basis >= 1");
    return BasisSystem(BasisKind::Fourier, domain, n_basis, 0, {});
}

BasisSystem BasisSystem::sine(Interval domain, int n_basis) {
    if (n_basis < 1) throw Error(ErrorCode::InvalidConfig, "sine basis needs n_basis >= 1");
    return BasisSystem(BasisKind::Sine, domain, n_basis, 0, {});
}

void BasisSystem::eval_row(double t, int derivative, double* out) const {
    std::fill(out, out + dimension_, 0.0);
    const double a = domain_.lower();
    const double width = domain_.width();
    switch (kind_) {
        case BasisKind::BSpline: {
            const int degree = order_ - 1;
            if (derivative > degree) return;
            const int span = find_span(knots_, dimension_, degree, t);
            const auto ders = bspline_derivatives(knots_, span, degree, t, derivative);
            for (int j = 0; j <= degree; ++j) out[span - degree + j] = ders[derivative][j];
            return;
        }
        case BasisKind::Sine: {
            const double scale = std::sqrt(2.0 / width);
            for (int m = 1; m <= dimension_; ++m) {
                const double omega = m * kPi / width;
                const double phase = omega * (t - a) + 0.5 * kPi * derivative;
                out[m - 1] = scale * std::pow(omega, derivative) * std::sin(phase);
            }
            return;
        }
        case BasisKind::Fourier: {
            out[0] = derivative == 0 ? 1.0 / std::sqrt(width) : 0.0;
            const double scale = std::sqrt(2.0 / width);
            for (int idx = 1; idx < dimension_; ++idx) {
                const int m = (idx + 1) / 2;
                const double omega = 2.0 * kPi * m / width;
                const double phase = omega * (t - a) + 0.5 * kPi * derivative;
                const double amp = scale * std::pow(omega, derivative);
                out[idx] = (idx % 2 == 1) ? amp * std::sin(phase) : amp * std::cos(phase);
            }
            return;
        }
    }
}

Eigen::MatrixXd BasisSystem::evaluate(std::span<const double> points, int derivative) const {
    if (derivative < 0) throw Error(ErrorCode::InvalidConfig, "derivative order must be nonnegative");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(points.size(), dimension_);
    const double slack = 1e-12 * domain_.width();
    for (std::size_t k = 0; k < points.size(); ++k) {
        double t = points[k];
        if (!(t >= domain_.lower() - slack && t <= domain_.upper() + slack)) {
            throw Error(ErrorCode::Domain, "evaluation point " + std::to_string(t) + " outside basis domain [" +
                                               std::to_string(domain_.lower()) + ", " +
                                               std::to_string(domain_.upper()) + "]");
        }
        t = std::clamp(t, domain_.lower(), domain_.upper());
        eval_row(t, derivative, out.row(k).data());
    }
    return out;
}

Eigen::RowVectorXd BasisSystem::evaluate(double t, int derivative) const {
    return evaluate(std::span<const double>(&t, 1), derivative).row(0);
}

void BasisSystem::build_matrices() {
    gram_ = compute_gram(*this);
    penalty_ = compute_penalty(*this);
}

bool BasisSystem::same_definition(const BasisSystem& other) const noexcept {
    return kind_ == other.kind_ && domain_ == other.domain_ && dimension_ == other.dimension_ &&
           order_ == other.order_ && knots_ == other.knots_;
}

std::string BasisSystem::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case BasisKind::BSpline: os << "bspline(order=" << order_ << ", "; break;
        case BasisKind::Fourier: os << "fourier("; break;
        case BasisKind::Sine: os << "sine("; break;
    }
    os << "n_basis=" << dimension_ << ", domain=[" << domain_.lower() << ", " << domain_.upper() << "])";
    return os.str();
}

namespace {

// Integrates products of two basis derivatives of the given order. B-splines
// use Gauss-Legendre per knot span (exact for the piecewise polynomials);
// trigonometric systems use closed forms.
Eigen::MatrixXd product_matrix(const BasisSystem& basis, int derivative) {
    const int d = basis.dimension();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    const double width = basis.domain().width();

    if (basis.kind() == BasisKind::Sine) {
        for (int m = 1; m <= d; ++m) out(m - 1, m - 1) = std::pow(m * kPi / width, 2 * derivative);
        return out;
    }
    if (basis.kind() == BasisKind::Fourier) {
        out(0, 0) = derivative == 0 ? 1.0 : 0.0;
        for (int idx = 1; idx < d; ++idx) {
            const int m = (idx + 1) / 2;
            out(idx, idx) = std::pow(2.0 * kPi * m / width, 2 * derivative);
        }
        return out;
    }

    const int degree = basis.order() - 1;
    if (derivative > degree) return out;
    const auto& knots = basis.knots();
    const GaussRule rule = gauss_legendre(basis.order() + 1);
    for (int span = degree; span < d; ++span) {
        const double lo = knots[span];
        const double hi = knots[span + 1];
        if (!(hi > lo)) continue;
        const double half = 0.5 * (hi - lo);
        const double mid = 0.5 * (hi + lo);
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double x = mid + half * rule.nodes[q];
            const double w = half * rule.weights[q];
            const auto ders = bspline_derivatives(knots, span, degree, x, derivative);
            const auto& v = ders[derivative];
            for (int i = 0; i <= degree; ++i) {
                for (int j = i; j <= degree; ++j) out(span - degree + i, span - degree + j) += w * v[i] * v[j];
            }
        }
    }
    // upper triangle accumulated; mirror for exact symmetry
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < i; ++j) out(i, j) = out(j, i);
    }
    return out;
}

}  // namespace

Eigen::MatrixXd compute_gram(const BasisSystem& basis) { return product_matrix(basis, 0); }

Eigen::MatrixXd compute_penalty(const BasisSystem& basis) { return product_matrix(basis, 2); }

Eigen::MatrixXd block_gram(std::span<const BasisSystem> bases) {
    Eigen::Index total = 0;
    for (const auto& b : bases) total += b.dimension();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(total, total);
    Eigen::Index offset = 0;
    for (const auto& b : bases) {
        out.block(offset, offset, b.dimension(), b.dimension()) = b.gram();
        offset += b.dimension();
    }
    return out;
}

Eigen::MatrixXd block_penalty(std::span<const BasisSystem> bases, std::span<const double> alpha) {
    if (alpha.size() != bases.size()) {
        throw Error(ErrorCode::DimensionMismatch, "alpha has " + std::to_string(alpha.size()) + " entries but there are " +
                                                      std::to_string(bases.size()) + " variables");
    }
    Eigen::Index total = 0;
    for (const auto& b : bases) total += b.dimension();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(total, total);
    Eigen::Index offset = 0;
    for (std::size_t j = 0; j < bases.size(); ++j) {
        const auto d = bases[j].dimension();
        out.block(offset, offset, d, d) = alpha[j] * bases[j].penalty();
        offset += d;
    }
    return out;
}

std::string matrix_digest(const Eigen::MatrixXd& m) {
    std::uint64_t hash = fnv1a(std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    char buf[64];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            // +0.0 folds negative zero so that -0 and 0 hash alike
            std::snprintf(buf, sizeof buf, "%.11e;", m(i, j) + 0.0);
            hash = fnv1a(buf, hash);
        }
    }
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void to_json(nlohmann::json& j, const BasisSystem& basis) {
    switch (basis.kind()) {
        case BasisKind::BSpline: j["kind"] = "bspline"; break;
        case BasisKind::Fourier: j["kind"] = "fourier"; break;
        case BasisKind::Sine: j["kind"] = "sine"; break;
    }
    j["domain"] = {basis.domain().lower(), basis.domain().upper()};
    j["dimension"] = basis.dimension();
    if (basis.kind() == BasisKind::BSpline) {
        j["order"] = basis.order();
        j["knots"] = basis.knots();
    }
    if (basis.kind() == BasisKind::Fourier) j["period"] = basis.period();
    j["gram_digest"] = matrix_digest(basis.gram());
    j["penalty_digest"] = matrix_digest(basis.penalty());
}

BasisSystem basis_from_json(const nlohmann::json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        const auto& dom = j.at("domain");
        const Interval domain(dom.at(0).get<double>(), dom.at(1).get<double>());
        const int dimension = j.contains("dimension") ? j.at("dimension").get<int>() : j.at("n_basis").get<int>();

        auto basis = [&]() {
            if (kind == "bspline") return BasisSystem::bspline(domain, dimension, j.value("order", 4));
            if (kind == "fourier") return BasisSystem::fourier(domain, dimension);
            if (kind == "sine") return BasisSystem::sine(domain, dimension);
            throw Error(ErrorCode::InvalidConfig, "unknown basis kind '" + kind + "'");
        }();

        if (kind == "bspline" && j.contains("knots")) {
            const auto stored = j.at("knots").get<std::vector<double>>();
            bool same = stored.size() == basis.knots().size();
            for (std::size_t i = 0; same && i < stored.size(); ++i) {
                same = std::abs(stored[i] - basis.knots()[i]) <= 1e-12 * domain.width();
            }
            if (!same) throw Error(ErrorCode::Checksum, "stored knots do not match the equally spaced knot rule");
        }
        if (kind == "fourier" && j.contains("period") &&
            std::abs(j.at("period").get<double>() - domain.width()) > 1e-12 * domain.width()) {
            throw Error(ErrorCode::InvalidConfig, "Fourier period must equal the domain width");
        }
        if (j.contains("gram_digest") && j.at("gram_digest").get<std::string>() != matrix_digest(basis.gram())) {
            throw Error(ErrorCode::Checksum, "Gram matrix digest mismatch for " + basis.describe());
        }
        if (j.contains("penalty_digest") &&
            j.at("penalty_digest").get<std::string>() != matrix_digest(basis.penalty())) {
            throw Error(ErrorCode::Checksum, "penalty matrix digest mismatch for " + basis.describe());
        }
        return basis;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed basis description: ") + e.what());
    }
}

}  // namespace remfpca
