#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "remfpca/basis.hpp"
#include "remfpca/fundata.hpp"
#include "remfpca/random.hpp"

namespace testing_support {

/// Composite Simpson rule on `points` (odd) equally spaced nodes.
inline double simpson(const std::function<double(double)>& f, double a, double b, int points = 10001) {
    const int m = points - 1;
    const double h = (b - a) / m;
    double s = f(a) + f(b);
    for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

/// Random coefficient dataset over B-spline bases on [0, 1].
inline remfpca::MFDataset random_dataset(remfpca::Rng& rng, const std::vector<int>& dims, int n) {
    std::vector<remfpca::BasisSystem> bases;
    for (int d : dims) bases.push_back(remfpca::BasisSystem::bspline(remfpca::Interval(0.0, 1.0), d));
    Eigen::Index total = 0;
    for (int d : dims) total += d;
    Eigen::MatrixXd c(n, total);
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        for (Eigen::Index k = 0; k < c.cols(); ++k) c(i, k) = rng.normal();
    }
    return remfpca::MFDataset(bases, c);
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing_support
