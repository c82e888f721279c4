#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace remfpca {

/// Closed, bounded interval [lower, upper] with lower < upper.
class Interval {
public:
    Interval(double lower, double upper);

    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    double width() const noexcept { return upper_ - lower_; }
    bool contains(double t) const noexcept { return t >= lower_ && t <= upper_; }

    friend bool operator==(const Interval&, const Interval&) = default;

private:
    double lower_;
    double upper_;
};

enum class BasisKind {
    BSpline,  ///< order-k B-splines, equally spaced interior knots
    Fourier,  ///< 1, sin, cos, sin, cos, ... with period equal to the domain width
    Sine,     ///< sqrt(2/L) sin(m pi (t - a) / L), m = 1..d
};

/// A finite basis for one functional variable together with its Gram matrix
/// and second-derivative roughness penalty. Immutable once built.
class BasisSystem {
public:
    static BasisSystem bspline(Interval domain, int n_basis, int order = 4);
    static BasisSystem fourier(Interval domain, int n_basis);
    static BasisSystem sine(Interval domain, int n_basis);

    BasisKind kind() const noexcept { return kind_; }
    const Interval& domain() const noexcept { return domain_; }
    int dimension() const noexcept { return dimension_; }
    /// B-spline order (degree + 1); zero for trigonometric bases.
    int order() const noexcept { return order_; }
    /// Full knot vector including the order-fold boundary knots (B-spline only).
    const std::vector<double>& knots() const noexcept { return knots_; }
    /// Fourier period; equals the domain width.
    double period() const noexcept { return domain_.width(); }

    const Eigen::MatrixXd& gram() const noexcept { return gram_; }
    const Eigen::MatrixXd& penalty() const noexcept { return penalty_; }

    /// Row k holds the `derivative`-th derivative of every basis function at
    /// points[k]. Throws ErrorCode::Domain for points outside the domain.
    Eigen::MatrixXd evaluate(std::span<const double> points, int derivative = 0) const;
    Eigen::RowVectorXd evaluate(double t, int derivative = 0) const;

    /// Same kind, domain, dimension and order (hence identical matrices).
    bool same_definition(const BasisSystem& other) const noexcept;

    std::string describe() const;

private:
    BasisSystem(BasisKind kind, Interval domain, int dimension, int order, std::vector<double> knots);

    void eval_row(double t, int derivative, double* out) const;
    void build_matrices();

    BasisKind kind_;
    Interval domain_;
    int dimension_;
    int order_;
    std::vector<double> knots_;
    Eigen::MatrixXd gram_;
    Eigen::MatrixXd penalty_;
};

/// Gram matrix, recomputed from the basis definition.
Eigen::MatrixXd compute_gram(const BasisSystem& basis);
/// Second-derivative penalty matrix, recomputed from the basis definition.
Eigen::MatrixXd compute_penalty(const BasisSystem& basis);

/// Block-diagonal Gram matrix over several variables.
Eigen::MatrixXd block_gram(std::span<const BasisSystem> bases);
/// Block-diagonal alpha-weighted penalty, blockdiag(alpha_j * D_j).
Eigen::MatrixXd block_penalty(std::span<const BasisSystem> bases, std::span<const double> alpha);

/// FNV-1a digest of the entries (row-major) printed to 12 significant digits.
std::string matrix_digest(const Eigen::MatrixXd& m);

void to_json(nlohmann::json& j, const BasisSystem& basis);
/// Rebuilds the basis from its definition and verifies the stored digests.
BasisSystem basis_from_json(const nlohmann::json& j);

}  // namespace remfpca
