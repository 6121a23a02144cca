#ifndef FE2_MESH_HPP
#define FE2_MESH_HPP

#include "fe2/kinematics.hpp"

#include <json.hpp>

#include <array>
#include <span>
#include <vector>

namespace fe2 {

/// Structured Lagrange mesh. Nodes are numbered lexicographically with the
/// first coordinate running fastest; element-local nodes follow the same
/// convention on the reference element [-1, 1]^Dim.
template <int Dim>
struct Mesh {
    int order = 1;
    std::array<int, Dim> cells{};
    std::vector<Vec<Dim>> nodes;
    std::vector<int> connectivity;

    int nodes_per_element() const;
    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_elements() const { return static_cast<int>(connectivity.size()) / nodes_per_element(); }
    int nodes_along(int direction) const { return order * cells[direction] + 1; }

    std::span<const int> element(int e) const {
        const int n = nodes_per_element();
        return {connectivity.data() + static_cast<std::size_t>(e) * n, static_cast<std::size_t>(n)};
    }
};

Mesh<1> build_interval_mesh(double length, int elements, int order);

/// Cook trapezoid with corners (0,0), (480,440), (480,600), (0,440); nodes are
/// placed by linear blending between the lower and upper edges.
Mesh<2> build_cook_mesh(int nx, int ny, int order = 1);

/// Uniform mesh of the box [lower, upper].
template <int Dim>
Mesh<Dim> build_box_mesh(const Vec<Dim>& lower, const Vec<Dim>& upper, const std::array<int, Dim>& cells,
                         int order);

Mesh<2> build_rve_mesh(double lower, double upper, int nx, int ny, int order = 1);

/// Lagrange basis on the reference element: values (n) and reference
/// gradients (n x Dim).
template <int Dim>
struct ReferenceShape {
    Eigen::VectorXd values;
    Eigen::Matrix<double, Eigen::Dynamic, Dim> gradients;
};

template <int Dim>
ReferenceShape<Dim> reference_shape(int order, const Vec<Dim>& xi);

template <int Dim>
struct ShapeValues {
    Eigen::VectorXd values;
    Eigen::Matrix<double, Eigen::Dynamic, Dim> gradients;  // physical
    double det_jacobian = 0.0;
    Vec<Dim> point;
};

/// Throws std::runtime_error on a singular or inverted element map.
template <int Dim>
ShapeValues<Dim> shape_values(const Mesh<Dim>& mesh, int element, const Vec<Dim>& xi);

template <int Dim>
double element_diameter(const Mesh<Dim>& mesh, int element);

template <int Dim>
double element_volume(const Mesh<Dim>& mesh, int element);

/// Maximal element diameter.
template <int Dim>
double mesh_size(const Mesh<Dim>& mesh);

template <int Dim>
double mesh_volume(const Mesh<Dim>& mesh);

enum class Side { XMin, XMax, YMin, YMax };

/// Boundary facets of a structured mesh on one side, each as the ordered list
/// of its nodes. In 1D a facet is a single node.
template <int Dim>
std::vector<std::vector<int>> boundary_facets(const Mesh<Dim>& mesh, Side side);

template <int Dim>
std::vector<int> boundary_nodes(const Mesh<Dim>& mesh, Side side);

template <int Dim>
nlohmann::json mesh_summary(const Mesh<Dim>& mesh);

}  // namespace fe2

#endif
