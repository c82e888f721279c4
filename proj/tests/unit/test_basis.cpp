#include <gtest/gtest.h>

#include <numbers>

#include <nlohmann/json.hpp>

#include "remfpca/basis.hpp"
#include "remfpca/error.hpp"
#include "support.hpp"

using namespace remfpca;
using testing_support::simpson;

namespace {
const Interval unit(0.0, 1.0);
constexpr double pi = std::numbers::pi;
}  // namespace

TEST(Interval, RejectsEmptyOrInfinite) {
    EXPECT_THROW(Interval(1.0, 1.0), Error);
    EXPECT_THROW(Interval(2.0, 1.0), Error);
    EXPECT_THROW(Interval(0.0, INFINITY), Error);
}

TEST(BSpline, SingleSpanCubicGramCorner) {
    const auto b = BasisSystem::bspline(unit, 4, 4);
    // (1 - t)^3 squared integrates to 1/7
    EXPECT_NEAR(b.gram()(0, 0), 1.0 / 7.0, 1e-14);
    EXPECT_NEAR(simpson([](double t) { return std::pow(1 - t, 6); }, 0, 1), 1.0 / 7.0, 1e-12);
}

TEST(BSpline, PartitionOfUnity) {
    const auto b = BasisSystem::bspline(unit, 10, 4);
    Rng rng(3);
    std::vector<double> pts{0.0, 1.0};
    for (int i = 0; i < 100; ++i) pts.push_back(rng.uniform());
    const Eigen::MatrixXd e = b.evaluate(pts);
    for (Eigen::Index k = 0; k < e.rows(); ++k) EXPECT_NEAR(e.row(k).sum(), 1.0, 1e-12);
}

TEST(BSpline, PenaltyAnnihilatesLinearFunctions) {
    const auto b = BasisSystem::bspline(unit, 10, 4);
    std::vector<double> grid;
    for (int k = 0; k <= 200; ++k) grid.push_back(k / 200.0);
    const Eigen::MatrixXd x = b.evaluate(grid);
    Eigen::VectorXd y(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) y[k] = grid[k];
    const Eigen::VectorXd c = x.colPivHouseholderQr().solve(y);
    EXPECT_LT((b.penalty() * c).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BSpline, PenaltyNullspaceHasDimensionTwo) {
    for (int d : {5, 8, 13}) {
        const auto b = BasisSystem::bspline(unit, d, 4);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.penalty());
        const double top = es.eigenvalues().maxCoeff();
        int zeros = 0;
        for (double v : es.eigenvalues()) zeros += std::abs(v) < 1e-10 * top;
        EXPECT_EQ(zeros, 2) << "d=" << d;
    }
}

TEST(BSpline, EndpointRows) {
    const auto b = BasisSystem::bspline(Interval(-1.0, 2.0), 7, 4);
    const Eigen::RowVectorXd lo = b.evaluate(-1.0);
    const Eigen::RowVectorXd hi = b.evaluate(2.0);
    EXPECT_DOUBLE_EQ(lo[0], 1.0);
    EXPECT_DOUBLE_EQ(hi[6], 1.0);
    EXPECT_NEAR(lo.tail(6).cwiseAbs().sum(), 0.0, 1e-15);
    EXPECT_NEAR(hi.head(6).cwiseAbs().sum(), 0.0, 1e-15);
}

TEST(BSpline, GramAndPenaltyMatchSimpsonOracle) {
    for (int order : {3, 4, 5}) {
        const auto b = BasisSystem::bspline(Interval(0.0, 2.0), 9, order);
        for (int i = 0; i < b.dimension(); ++i) {
            for (int j = i; j < b.dimension(); ++j) {
                const double g = simpson([&](double t) { return b.evaluate(t)[i] * b.evaluate(t)[j]; }, 0, 2);
                EXPECT_NEAR(b.gram()(i, j), g, 1e-8) << order << " " << i << " " << j;
                if (order >= 4) {
                    const double p =
                        simpson([&](double t) { return b.evaluate(t, 2)[i] * b.evaluate(t, 2)[j]; }, 0, 2);
                    EXPECT_NEAR(b.penalty()(i, j), p, 1e-5 * (1 + std::abs(p))) << order << " " << i << " " << j;
                }
            }
        }
    }
}

TEST(BSpline, DerivativeMatchesFiniteDifference) {
    const auto b = BasisSystem::bspline(unit, 8, 4);
    const double h = 1e-5;
    for (double t : {0.13, 0.5, 0.77}) {
        const Eigen::RowVectorXd fd = (b.evaluate(t + h) - b.evaluate(t - h)) / (2 * h);
        EXPECT_LT((fd - b.evaluate(t, 1)).cwiseAbs().maxCoeff(), 1e-6);
        const Eigen::RowVectorXd fd2 = (b.evaluate(t + h, 1) - b.evaluate(t - h, 1)) / (2 * h);
        EXPECT_LT((fd2 - b.evaluate(t, 2)).cwiseAbs().maxCoeff(), 1e-4);
    }
}

TEST(BSpline, InvalidConfigurations) {
    try {
        BasisSystem::bspline(unit, 3, 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    }
    EXPECT_THROW(BasisSystem::bspline(unit, 5, 1), Error);
}

TEST(BSpline, OutOfDomainPointIsDomainError) {
    const auto b = BasisSystem::bspline(unit, 6);
    try {
        b.evaluate(1.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Domain);
    }
}

TEST(Sine, OrthonormalGramAndDiagonalPenalty) {
    const auto b = BasisSystem::sine(unit, 3);
    EXPECT_LT((b.gram() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
    for (int m = 1; m <= 3; ++m) EXPECT_NEAR(b.penalty()(m - 1, m - 1), std::pow(m * pi, 4), 1e-9);
    EXPECT_NEAR(b.penalty()(0, 1), 0.0, 1e-14);
    // oracle: integral of 2 sin(m pi t) sin(k pi t)
    for (int m = 1; m <= 3; ++m) {
        for (int k = 1; k <= 3; ++k) {
            const double g = simpson([&](double t) { return 2 * std::sin(m * pi * t) * std::sin(k * pi * t); }, 0, 1);
            EXPECT_NEAR(g, m == k ? 1.0 : 0.0, 1e-10);
        }
    }
}

TEST(Sine, PointEvaluations) {
    const auto b = BasisSystem::sine(unit, 4);
    EXPECT_LT(b.evaluate(0.0).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(b.evaluate(0.5)[0], std::sqrt(2.0), 1e-15);
}

TEST(Fourier, ClosedFormsMatchQuadrature) {
    for (int n : {1, 4, 5}) {
        const auto b = BasisSystem::fourier(Interval(0.0, 2.0), n);
        EXPECT_EQ(b.gram().rows(), n);
        EXPECT_GT(b.gram()(0, 0), 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double g = simpson([&](double t) { return b.evaluate(t)[i] * b.evaluate(t)[j]; }, 0, 2);
                const double p = simpson([&](double t) { return b.evaluate(t, 2)[i] * b.evaluate(t, 2)[j]; }, 0, 2);
                EXPECT_NEAR(b.gram()(i, j), g, 1e-9);
                EXPECT_NEAR(b.penalty()(i, j), p, 1e-7 * (1 + std::abs(p)));
            }
        }
    }
    EXPECT_THROW(BasisSystem::fourier(unit, 0), Error);
}

TEST(BasisInvariants, GramSpdPenaltyPsdSymmetric) {
    std::vector<BasisSystem> all{BasisSystem::bspline(unit, 4), BasisSystem::bspline(unit, 15),
                                 BasisSystem::bspline(Interval(-3, 5), 20, 3), BasisSystem::fourier(unit, 7),
                                 BasisSystem::sine(unit, 6)};
    for (const auto& b : all) {
        EXPECT_EQ(b.gram(), b.gram().transpose());
        EXPECT_EQ(b.penalty(), b.penalty().transpose());
        EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(b.gram()).info(), Eigen::Success);
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b.penalty()).eigenvalues();
        EXPECT_GE(ev.minCoeff(), -1e-10 * std::max(1.0, ev.maxCoeff()));
        EXPECT_EQ(compute_gram(b), b.gram());
    }
}

TEST(BasisJson, RoundTripAndChecksum) {
    const auto b = BasisSystem::bspline(Interval(0.0, 3.0), 11, 4);
    nlohmann::json j = b;
    const BasisSystem back = basis_from_json(j);
    EXPECT_TRUE(back.same_definition(b));
    EXPECT_EQ(back.gram(), b.gram());
    j["gram_digest"] = "0000000000000000";
    try {
        basis_from_json(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Checksum);
    }
}

TEST(BlockMatrices, BlockDiagonalLayout) {
    std::vector<BasisSystem> bases{BasisSystem::bspline(unit, 5), BasisSystem::sine(unit, 3)};
    const Eigen::MatrixXd g = block_gram(bases);
    ASSERT_EQ(g.rows(), 8);
    EXPECT_EQ(g.block(0, 0, 5, 5), bases[0].gram());
    EXPECT_EQ(g.block(5, 5, 3, 3), bases[1].gram());
    EXPECT_EQ(g.block(0, 5, 5, 3).cwiseAbs().maxCoeff(), 0.0);
    const std::vector<double> alpha{2.0, 0.5};
    const Eigen::MatrixXd d = block_penalty(bases, alpha);
    EXPECT_EQ(d.block(0, 0, 5, 5), 2.0 * bases[0].penalty());
    EXPECT_EQ(d.block(5, 5, 3, 3), 0.5 * bases[1].penalty());
    const std::vector<double> wrong{1.0};
    EXPECT_THROW(block_penalty(bases, wrong), Error);
}
