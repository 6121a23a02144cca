#ifndef FE2_QUADRATURE_HPP
#define FE2_QUADRATURE_HPP

#include "fe2/kinematics.hpp"

#include <vector>

namespace fe2 {

/// Tensor-product rule on the reference element [-1, 1]^Dim.
template <int Dim>
struct QuadratureRule {
    std::vector<Vec<Dim>> points;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
};

constexpr int max_gauss_points = 16;

/// Gauss-Legendre abscissae and weights on [-1, 1] from the roots of P_n.
void gauss_legendre(int n, std::vector<double>& points, std::vector<double>& weights);

/// `order` points per direction, exact for degree 2 * order - 1 per direction.
/// Throws std::invalid_argument outside 1..max_gauss_points.
template <int Dim>
QuadratureRule<Dim> gauss_rule(int order);

}  // namespace fe2

#endif
