#include "fe2/mesh.hpp"

#include "fe2/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fe2 {

namespace {

int ipow(int base, int exp) {
    int out = 1;
    for (int i = 0; i < exp; ++i) out *= base;
    return out;
}

void lagrange_1d(int order, double xi, double* values, double* derivatives) {
    const int n = order + 1;
    for (int a = 0; a < n; ++a) {
        const double xa = -1.0 + 2.0 * a / order;
        double value = 1.0;
        double derivative = 0.0;
        for (int b = 0; b < n; ++b) {
            if (b == a) continue;
            const double xb = -1.0 + 2.0 * b / order;
            double term = 1.0 / (xa - xb);
            for (int c = 0; c < n; ++c) {
                if (c == a || c == b) continue;
                const double xc = -1.0 + 2.0 * c / order;
                term *= (xi - xc) / (xa - xc);
            }
            derivative += term;
            value *= (xi - xb) / (xa - xb);
        }
        values[a] = value;
        derivatives[a] = derivative;
    }
}

template <int Dim>
void structured_connectivity(Mesh<Dim>& mesh) {
    const int p = mesh.order;
    const int npe = mesh.nodes_per_element();
    int n_elements = 1;
    for (int d = 0; d < Dim; ++d) n_elements *= mesh.cells[d];
    mesh.connectivity.resize(static_cast<std::size_t>(n_elements) * npe);

    for (int e = 0; e < n_elements; ++e) {
        std::array<int, Dim> cell{};
        int rest = e;
        for (int d = 0; d < Dim; ++d) {
            cell[d] = rest % mesh.cells[d];
            rest /= mesh.cells[d];
        }
        for (int a = 0; a < npe; ++a) {
            int local = a;
            int global = 0;
            int stride = 1;
            for (int d = 0; d < Dim; ++d) {
                const int ad = local % (p + 1);
                local /= p + 1;
                global += (p * cell[d] + ad) * stride;
                stride *= mesh.nodes_along(d);
            }
            mesh.connectivity[static_cast<std::size_t>(e) * npe + a] = global;
        }
    }
}

}  // namespace

template <int Dim>
int Mesh<Dim>::nodes_per_element() const {
    return ipow(order + 1, Dim);
}

template <int Dim>
Mesh<Dim> build_box_mesh(const Vec<Dim>& lower, const Vec<Dim>& upper, const std::array<int, Dim>& cells,
                         int order) {
    if (order < 1) throw std::invalid_argument("element order must be at least 1");
    for (int d = 0; d < Dim; ++d) {
        if (cells[d] < 1) throw std::invalid_argument("mesh needs at least one element per direction");
        if (!(upper(d) > lower(d))) throw std::invalid_argument("empty mesh extent");
    }
    Mesh<Dim> mesh;
    mesh.order = order;
    mesh.cells = cells;
    int n_nodes = 1;
    for (int d = 0; d < Dim; ++d) n_nodes *= mesh.nodes_along(d);
    mesh.nodes.resize(n_nodes);
    for (int n = 0; n < n_nodes; ++n) {
        int rest = n;
        for (int d = 0; d < Dim; ++d) {
            const int count = mesh.nodes_along(d);
            const int i = rest % count;
            rest /= count;
            mesh.nodes[n](d) = lower(d) + (upper(d) - lower(d)) * i / (count - 1);
        }
    }
    structured_connectivity(mesh);
    return mesh;
}

Mesh<1> build_interval_mesh(double length, int elements, int order) {
    if (elements < 1) throw std::invalid_argument("interval mesh needs at least one element");
    return build_box_mesh<1>(Vec<1>::Zero(), Vec<1>::Constant(length), {elements}, order);
}

Mesh<2> build_cook_mesh(int nx, int ny, int order) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("cook mesh needs at least one element per direction");
    Mesh<2> mesh = build_box_mesh<2>(Vec<2>(0.0, 0.0), Vec<2>(1.0, 1.0), {nx, ny}, order);
    for (auto& node : mesh.nodes) {
        const double s = node(0);
        const double t = node(1);
        const double x1 = 480.0 * s;
        const double lower = 11.0 / 12.0 * x1;
        const double upper = x1 / 3.0 + 440.0;
        node = Vec<2>(x1, lower + t * (upper - lower));
    }
    return mesh;
}

Mesh<2> build_rve_mesh(double lower, double upper, int nx, int ny, int order) {
    return build_box_mesh<2>(Vec<2>::Constant(lower), Vec<2>::Constant(upper), {nx, ny}, order);
}

template <int Dim>
ReferenceShape<Dim> reference_shape(int order, const Vec<Dim>& xi) {
    const int n1 = order + 1;
    std::array<std::array<double, 8>, Dim> v{};
    std::array<std::array<double, 8>, Dim> dv{};
    if (n1 > 8) throw std::invalid_argument("element order too high");
    for (int d = 0; d < Dim; ++d) lagrange_1d(order, xi(d), v[d].data(), dv[d].data());

    const int n = ipow(n1, Dim);
    ReferenceShape<Dim> out;
    out.values.resize(n);
    out.gradients.resize(n, Dim);
    for (int a = 0; a < n; ++a) {
        std::array<int, Dim> idx{};
        int rest = a;
        for (int d = 0; d < Dim; ++d) {
            idx[d] = rest % n1;
            rest /= n1;
        }
        double value = 1.0;
        for (int d = 0; d < Dim; ++d) value *= v[d][idx[d]];
        out.values(a) = value;
        for (int g = 0; g < Dim; ++g) {
            double grad = 1.0;
            for (int d = 0; d < Dim; ++d) grad *= (d == g) ? dv[d][idx[d]] : v[d][idx[d]];
            out.gradients(a, g) = grad;
        }
    }
    return out;
}

template <int Dim>
ShapeValues<Dim> shape_values(const Mesh<Dim>& mesh, int element, const Vec<Dim>& xi) {
    const ReferenceShape<Dim> ref = reference_shape<Dim>(mesh.order, xi);
    const auto nodes = mesh.element(element);

    Tensor2<Dim> jac = Tensor2<Dim>::Zero();  // dX / dxi
    Vec<Dim> point = Vec<Dim>::Zero();
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        const Vec<Dim>& X = mesh.nodes[nodes[a]];
        point += ref.values(a) * X;
        jac += X * ref.gradients.row(a);
    }
    const double det = jac.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) {
        throw std::runtime_error("singular or inverted element map in element " + std::to_string(element));
    }
    ShapeValues<Dim> out;
    out.values = ref.values;
    out.gradients = ref.gradients * jac.inverse();
    out.det_jacobian = det;
    out.point = point;
    return out;
}

template <int Dim>
double element_diameter(const Mesh<Dim>& mesh, int element) {
    const auto nodes = mesh.element(element);
    const int n1 = mesh.order + 1;
    std::vector<Vec<Dim>> corners;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        int rest = static_cast<int>(a);
        bool corner = true;
        for (int d = 0; d < Dim; ++d) {
            const int i = rest % n1;
            rest /= n1;
            corner = corner && (i == 0 || i == mesh.order);
        }
        if (corner) corners.push_back(mesh.nodes[nodes[a]]);
    }
    double diameter = 0.0;
    for (const auto& a : corners) {
        for (const auto& b : corners) diameter = std::max(diameter, (a - b).norm());
    }
    return diameter;
}

template <int Dim>
double element_volume(const Mesh<Dim>& mesh, int element) {
    const QuadratureRule<Dim> rule = gauss_rule<Dim>(mesh.order + 1);
    double volume = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        volume += rule.weights[q] * shape_values(mesh, element, rule.points[q]).det_jacobian;
    }
    return volume;
}

template <int Dim>
double mesh_size(const Mesh<Dim>& mesh) {
    double h = 0.0;
    for (int e = 0; e < mesh.num_elements(); ++e) h = std::max(h, element_diameter(mesh, e));
    return h;
}

template <int Dim>
double mesh_volume(const Mesh<Dim>& mesh) {
    double volume = 0.0;
    for (int e = 0; e < mesh.num_elements(); ++e) volume += element_volume(mesh, e);
    return volume;
}

template <int Dim>
std::vector<std::vector<int>> boundary_facets(const Mesh<Dim>& mesh, Side side) {
    std::vector<std::vector<int>> facets;
    if constexpr (Dim == 1) {
        if (side == Side::XMin) facets.push_back({0});
        else if (side == Side::XMax) facets.push_back({mesh.num_nodes() - 1});
        else throw std::invalid_argument("1D meshes only have XMin/XMax sides");
    } else {
        const int nx = mesh.nodes_along(0);
        const int ny = mesh.nodes_along(1);
        const bool vertical = side == Side::XMin || side == Side::XMax;
        const int cells = vertical ? mesh.cells[1] : mesh.cells[0];
        for (int c = 0; c < cells; ++c) {
            std::vector<int> facet;
            for (int a = 0; a <= mesh.order; ++a) {
                const int along = mesh.order * c + a;
                switch (side) {
                    case Side::XMin: facet.push_back(along * nx); break;
                    case Side::XMax: facet.push_back(along * nx + nx - 1); break;
                    case Side::YMin: facet.push_back(along); break;
                    case Side::YMax: facet.push_back((ny - 1) * nx + along); break;
                }
            }
            facets.push_back(std::move(facet));
        }
    }
    return facets;
}

template <int Dim>
std::vector<int> boundary_nodes(const Mesh<Dim>& mesh, Side side) {
    std::vector<int> nodes;
    for (const auto& facet : boundary_facets(mesh, side)) nodes.insert(nodes.end(), facet.begin(), facet.end());
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    return nodes;
}

template <int Dim>
nlohmann::json mesh_summary(const Mesh<Dim>& mesh) {
    return {{"dimension", Dim},
            {"order", mesh.order},
            {"nodes", mesh.num_nodes()},
            {"elements", mesh.num_elements()},
            {"h", mesh_size(mesh)}};
}

#define FE2_INSTANTIATE_MESH(D)                                                                            \
    template struct Mesh<D>;                                                                               \
    template Mesh<D> build_box_mesh<D>(const Vec<D>&, const Vec<D>&, const std::array<int, D>&, int);      \
    template ReferenceShape<D> reference_shape<D>(int, const Vec<D>&);                                      \
    template ShapeValues<D> shape_values<D>(const Mesh<D>&, int, const Vec<D>&);                            \
    template double element_diameter<D>(const Mesh<D>&, int);                                               \
    template double element_volume<D>(const Mesh<D>&, int);                                                 \
    template double mesh_size<D>(const Mesh<D>&);                                                           \
    template double mesh_volume<D>(const Mesh<D>&);                                                         \
    template std::vector<std::vector<int>> boundary_facets<D>(const Mesh<D>&, Side);                        \
    template std::vector<int> boundary_nodes<D>(const Mesh<D>&, Side);                                      \
    template nlohmann::json mesh_summary<D>(const Mesh<D>&);

FE2_INSTANTIATE_MESH(1)
FE2_INSTANTIATE_MESH(2)

#undef FE2_INSTANTIATE_MESH

}  // namespace fe2
