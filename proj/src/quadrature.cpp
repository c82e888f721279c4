#include "remfpca/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "remfpca/error.hpp"

namespace remfpca {

GaussRule gauss_legendre(int n) {
    if (n < 1) throw Error(ErrorCode::InvalidConfig, "Gauss-Legendre rule needs at least one node");
    GaussRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    // Newton iteration on P_n; roots are symmetric so only half are computed.
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p_prev = 1.0;
            double p = x;
            for (int k = 2; k <= n; ++k) {
                const double next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
                p_prev = p;
                p = next;
            }
            if (n == 1) p_prev = 1.0;
            dp = n * (x * p - p_prev) / (x * x - 1.0);
            const double step = p / dp;
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

double integrate(const std::function<double(double)>& f, double a, double b, int panels,
                 int nodes_per_panel) {
    if (panels < 1) throw Error(ErrorCode::InvalidConfig, "quadrature needs at least one panel");
    const GaussRule rule = gauss_legendre(nodes_per_panel);
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        const double mid = lo + 0.5 * h;
        double panel = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) panel += rule.weights[q] * f(mid + 0.5 * h * rule.nodes[q]);
        total += 0.5 * h * panel;
    }
    return total;
}

}  // namespace remfpca
