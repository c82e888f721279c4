#pragma once

#include <functional>
#include <vector>

namespace remfpca {

/// Gauss-Legendre nodes and weights on [-1, 1]; exact for polynomials of
/// degree up to 2n - 1.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussRule gauss_legendre(int n);

/// Composite Gauss-Legendre over [a, b] split into equal panels.
double integrate(const std::function<double(double)>& f, double a, double b, int panels = 128,
                 int nodes_per_panel = 8);

}  // namespace remfpca
