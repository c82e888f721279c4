#include <gtest/gtest.h>

#include <numbers>

#include "remfpca/error.hpp"
#include "remfpca/fundata.hpp"
#include "remfpca/quadrature.hpp"
#include "support.hpp"

using namespace remfpca;
using testing_support::max_abs;
using testing_support::simpson;

namespace {

const Interval unit(0.0, 1.0);

Eigen::VectorXd grid(int K) { return Eigen::VectorXd::LinSpaced(K, 0.0, 1.0); }

GridObservations single(const Eigen::VectorXd& t, const Eigen::MatrixXd& y, std::string name = "x") {
    GridObservations obs;
    obs.variables.push_back({std::move(name), t, y});
    return obs;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Io;
}

}  // namespace

TEST(Smooth, RecoversRepresentableFunctions) {
    const auto b = BasisSystem::bspline(unit, 8);
    const Eigen::VectorXd t = grid(41);
    Rng rng(1);
    Eigen::MatrixXd c(3, 8);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.normal();
    const Eigen::MatrixXd y = c * b.evaluate(std::span<const double>(t.data(), t.size())).transpose();
    const MFDataset d = smooth_to_coeffs(single(t, y), {b});
    EXPECT_LT(max_abs(d.coeffs() - c), 1e-8);
    // evaluation on the grid reproduces the input
    EXPECT_LT(max_abs(evaluate_variable(d, 0, std::span<const double>(t.data(), t.size())) - y), 1e-8);
}

TEST(Smooth, ConstantOneGivesUnitCoefficients) {
    const auto b = BasisSystem::bspline(unit, 9);
    const MFDataset d = smooth_to_coeffs(single(grid(30), Eigen::MatrixXd::Ones(2, 30)), {b});
    EXPECT_LT(max_abs(d.coeffs() - Eigen::MatrixXd::Ones(2, 9)), 1e-10);
}

TEST(Smooth, SineProjection) {
    const auto b = BasisSystem::sine(unit, 5);
    const Eigen::VectorXd t = grid(101);
    Eigen::MatrixXd y(1, 101);
    for (int k = 0; k < 101; ++k) y(0, k) = std::sqrt(2.0) * std::sin(std::numbers::pi * t[k]);
    const MFDataset d = smooth_to_coeffs(single(t, y), {b});
    Eigen::RowVectorXd expect = Eigen::RowVectorXd::Zero(5);
    expect[0] = 1.0;
    EXPECT_LT(max_abs(d.coeffs() - expect), 1e-8);
}

TEST(Smooth, Errors) {
    const auto b = BasisSystem::bspline(unit, 10);
    EXPECT_EQ(code_of([&] { smooth_to_coeffs(single(grid(6), Eigen::MatrixXd::Zero(2, 6)), {b}); }),
              ErrorCode::Underdetermined);
    // all points inside one knot span: rank deficient
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(20, 0.0, 0.05);
    try {
        smooth_to_coeffs(single(t, Eigen::MatrixXd::Zero(2, 20), "voltage"), {b});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
        EXPECT_NE(std::string(e.what()).find("voltage"), std::string::npos);
    }
    EXPECT_EQ(code_of([&] { smooth_to_coeffs(single(grid(30), Eigen::MatrixXd::Zero(2, 30)), {b, b}); }),
              ErrorCode::DimensionMismatch);
}

TEST(Center, Examples) {
    const auto b = BasisSystem::sine(unit, 2);
    const MFDataset d({b}, (Eigen::MatrixXd(2, 2) << 1, 1, 3, 3).finished());
    const Centered c = center(d);
    EXPECT_EQ(c.data.coeffs(), (Eigen::MatrixXd(2, 2) << -1, -1, 1, 1).finished());
    EXPECT_EQ(c.mean, Eigen::Vector2d(2, 2));
    const MFDataset sym({b}, (Eigen::MatrixXd(2, 2) << 1, -2, -1, 2).finished());
    EXPECT_EQ(center(sym).data.coeffs(), sym.coeffs());
    EXPECT_EQ(center(sym).mean, Eigen::Vector2d::Zero());
}

TEST(InnerH, MatchesQuadratureOracle) {
    const auto b = BasisSystem::bspline(unit, 6);
    Rng rng(9);
    Eigen::MatrixXd c(1, 6);
    Eigen::VectorXd v(6);
    for (int k = 0; k < 6; ++k) {
        c(0, k) = rng.normal();
        v[k] = rng.normal();
    }
    const MFDataset d({b}, c);
    const double oracle = simpson([&](double t) { return (b.evaluate(t) * c.row(0).transpose())(0) * b.evaluate(t).dot(v); }, 0, 1);
    EXPECT_NEAR(inner_h(d, 0, v), oracle, 1e-8);
    EXPECT_EQ(inner_h(d, 0, Eigen::VectorXd::Zero(6)), 0.0);
    EXPECT_THROW(inner_h(d, 0, Eigen::VectorXd::Zero(5)), Error);
}

TEST(InnerH, OrthonormalUnitVectors) {
    const MFDataset d({BasisSystem::sine(unit, 3)}, (Eigen::MatrixXd(1, 3) << 1, 0, 0).finished());
    EXPECT_NEAR(inner_h(d, 0, Eigen::Vector3d(1, 0, 0)), 1.0, 1e-14);
}

TEST(InnerH, BilinearSymmetricPositive) {
    Rng rng(4);
    const MFDataset d = testing_support::random_dataset(rng, {5, 7}, 3);
    const Eigen::MatrixXd g = d.gram();
    const Eigen::VectorXd x = d.coeffs().row(0), y = d.coeffs().row(1), z = d.coeffs().row(2);
    EXPECT_NEAR(x.dot(g * y), y.dot(g * x), 1e-12);
    EXPECT_NEAR((2 * x + z).dot(g * y), 2 * x.dot(g * y) + z.dot(g * y), 1e-12);
    EXPECT_GT(x.dot(g * x), 0.0);
}

TEST(CovarianceV, Examples) {
    const auto b = BasisSystem::sine(unit, 1);
    EXPECT_NEAR(covariance_v(MFDataset({b}, (Eigen::MatrixXd(2, 1) << 1, -1).finished()))(0, 0), 2.0, 1e-15);
    const MFDataset same({b}, Eigen::MatrixXd::Constant(4, 1, 3.0));
    EXPECT_EQ(max_abs(covariance_v(same)), 0.0);
    EXPECT_EQ(code_of([&] { covariance_v(MFDataset({b}, Eigen::MatrixXd::Ones(1, 1))); }), ErrorCode::InsufficientSamples);
}

TEST(CovarianceV, SymmetricPsdShiftInvariant) {
    Rng rng(8);
    for (int rep = 0; rep < 10; ++rep) {
        const MFDataset d = testing_support::random_dataset(rng, {4, 6}, 7);
        const Eigen::MatrixXd v = covariance_v(d);
        EXPECT_EQ(v, v.transpose());
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(v).eigenvalues().minCoeff(), -1e-10);
        Eigen::MatrixXd shifted = d.coeffs();
        shifted.rowwise() += Eigen::RowVectorXd::LinSpaced(10, -3, 5);
        EXPECT_LT(max_abs(covariance_v(d.with_coeffs(shifted)) - v), 1e-10);
    }
}

namespace {

/// Integrated pointwise sample variance of variable j by quadrature.
double integrated_variance(const MFDataset& d, std::size_t j) {
    const auto& basis = d.bases()[j];
    const auto rule = gauss_legendre(20);
    const Interval dom = basis.domain();
    double total = 0.0;
    const int panels = 64;
    for (int p = 0; p < panels; ++p) {
        const double a = dom.lower() + dom.width() * p / panels, w = dom.width() / panels;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double t = a + 0.5 * w * (rule.nodes[q] + 1.0);
            const double tt[1] = {t};
            const Eigen::VectorXd x = evaluate_variable(d, j, tt).col(0);
            const double mean = x.mean();
            total += 0.5 * w * rule.weights[q] * (x.array() - mean).square().sum() / (x.size() - 1);
        }
    }
    return total;
}

}  // namespace

TEST(RescaleWeights, UnitIntegratedVarianceAfterRescaling) {
    Rng rng(21);
    const MFDataset d = testing_support::random_dataset(rng, {6, 9}, 12);
    const Eigen::VectorXd w = rescale_weights(d);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(w[j], 1.0 / integrated_variance(d, j), 1e-9 * w[j]);
    const MFDataset r = apply_weights(d, w);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(integrated_variance(r, j), 1.0, 1e-6);
    EXPECT_LT((rescale_weights(r).array() - 1.0).abs().maxCoeff(), 1e-10);
}

TEST(RescaleWeights, ScalingByThreeShrinksWeightNinefold) {
    Rng rng(2);
    const MFDataset d = testing_support::random_dataset(rng, {5, 5}, 6);
    Eigen::MatrixXd c = d.coeffs();
    c.leftCols(5) *= 3.0;
    const Eigen::VectorXd w0 = rescale_weights(d), w1 = rescale_weights(d.with_coeffs(c));
    EXPECT_NEAR(w1[0], w0[0] / 9.0, 1e-12 * w0[0]);
    EXPECT_NEAR(w1[1], w0[1], 1e-12 * w0[1]);
}

TEST(RescaleWeights, TwoSampleHandComputed) {
    // x1 = 1, x2 = -1 (constants on [0, 2]): pointwise variance 2, integral 4
    const auto b = BasisSystem::bspline(Interval(0.0, 2.0), 5);
    const MFDataset d({b}, (Eigen::MatrixXd(2, 5) << Eigen::RowVectorXd::Ones(5), -Eigen::RowVectorXd::Ones(5)).finished());
    EXPECT_NEAR(rescale_weights(d)[0], 0.25, 1e-12);
}

TEST(RescaleWeights, DegenerateVariableIsAnError) {
    const auto b = BasisSystem::bspline(unit, 5);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(3, 10);
    c(0, 0) = 1.0;
    EXPECT_EQ(code_of([&] { rescale_weights(MFDataset({b, b}, c)); }), ErrorCode::DegenerateVariable);
}

TEST(MFDataset, LayoutAndSubsets) {
    Rng rng(5);
    const MFDataset d = testing_support::random_dataset(rng, {4, 6, 5}, 8);
    EXPECT_EQ(d.block_offsets(), (std::vector<Eigen::Index>{0, 4, 10, 15}));
    EXPECT_EQ(d.variable(1).coeffs(), d.coeffs().middleCols(4, 6));
    const std::vector<Eigen::Index> rows{5, 1};
    const MFDataset s = d.select_rows(rows);
    EXPECT_EQ(s.coeffs().row(0), d.coeffs().row(5));
    EXPECT_TRUE(s.same_bases(d));
    EXPECT_THROW(MFDataset(d.bases(), Eigen::MatrixXd::Zero(2, 3)), Error);
}
