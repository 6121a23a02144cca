#include "fe2/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fe2 {

void gauss_legendre(int n, std::vector<double>& points, std::vector<double>& weights) {
    if (n < 1 || n > max_gauss_points) {
        throw std::invalid_argument("unsupported Gauss order " + std::to_string(n));
    }
    points.assign(n, 0.0);
    weights.assign(n, 0.0);
    if (n == 1) {
        weights[0] = 2.0;
        return;
    }
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Newton on P_n starting from the Chebyshev-like estimate
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = -x;
        points[n - 1 - i] = x;
        weights[i] = weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) points[n / 2] = 0.0;
}

template <int Dim>
QuadratureRule<Dim> gauss_rule(int order) {
    std::vector<double> x;
    std::vector<double> w;
    gauss_legendre(order, x, w);

    QuadratureRule<Dim> rule;
    int total = 1;
    for (int d = 0; d < Dim; ++d) total *= order;
    rule.points.reserve(total);
    rule.weights.reserve(total);
    for (int q = 0; q < total; ++q) {
        Vec<Dim> p;
        double weight = 1.0;
        int rest = q;
        for (int d = 0; d < Dim; ++d) {
            const int idx = rest % order;
            rest /= order;
            p(d) = x[idx];
            weight *= w[idx];
        }
        rule.points.push_back(p);
        rule.weights.push_back(weight);
    }
    return rule;
}

template QuadratureRule<1> gauss_rule<1>(int);
template QuadratureRule<2> gauss_rule<2>(int);

}  // namespace fe2
