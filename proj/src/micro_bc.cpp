#include "fe2/micro_bc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fe2 {

namespace {

constexpr double pairing_tolerance = 1e-9;

int find_root(std::vector<int>& parent, int n) {
    while (parent[n] != n) {
        parent[n] = parent[parent[n]];
        n = parent[n];
    }
    return n;
}

// Couples every node of `slave_side` to the node of `master_side` whose
// coordinate along `tangential` matches.
template <int Dim>
void pair_sides(const Mesh<Dim>& mesh, Side master_side, Side slave_side, int tangential,
                std::vector<int>& parent) {
    std::vector<int> masters = boundary_nodes(mesh, master_side);
    const std::vector<int> slaves = boundary_nodes(mesh, slave_side);
    if (masters.size() != slaves.size()) {
        throw std::invalid_argument("periodic sides carry different node counts");
    }
    std::sort(masters.begin(), masters.end(), [&](int a, int b) {
        return mesh.nodes[a](tangential) < mesh.nodes[b](tangential);
    });
    for (int slave : slaves) {
        const double coord = mesh.nodes[slave](tangential);
        auto it = std::lower_bound(masters.begin(), masters.end(), coord - pairing_tolerance,
                                   [&](int m, double value) { return mesh.nodes[m](tangential) < value; });
        if (it == masters.end() || std::abs(mesh.nodes[*it](tangential) - coord) > pairing_tolerance) {
            throw std::invalid_argument("periodic boundary nodes are not matched across opposite edges");
        }
        const int rs = find_root(parent, slave);
        const int rm = find_root(parent, *it);
        if (rs != rm) parent[std::max(rs, rm)] = std::min(rs, rm);
    }
}

}  // namespace

std::string to_string(MicroBc mode) {
    switch (mode) {
        case MicroBc::Taylor: return "taylor";
        case MicroBc::HomogeneousBoundary: return "boundary";
        case MicroBc::Periodic: return "periodic";
    }
    return "?";
}

MicroBc micro_bc_from_string(const std::string& name) {
    if (name == "taylor" || name == "i") return MicroBc::Taylor;
    if (name == "boundary" || name == "ii") return MicroBc::HomogeneousBoundary;
    if (name == "periodic" || name == "iii") return MicroBc::Periodic;
    throw std::invalid_argument("unknown micro boundary condition '" + name + "'");
}

template <int Dim>
MicroDofMap apply_micro_bc(MicroBc mode, const Mesh<Dim>& rve_mesh) {
    const int n = rve_mesh.num_nodes();
    MicroDofMap map;
    map.node_to_free.assign(n, -1);

    std::vector<bool> fixed(n, false);
    std::vector<int> master(n);
    std::iota(master.begin(), master.end(), 0);

    switch (mode) {
        case MicroBc::Taylor:
            std::fill(fixed.begin(), fixed.end(), true);
            break;
        case MicroBc::HomogeneousBoundary:
            for (Side side : {Side::XMin, Side::XMax, Side::YMin, Side::YMax}) {
                if (Dim == 1 && (side == Side::YMin || side == Side::YMax)) continue;
                for (int node : boundary_nodes(rve_mesh, side)) fixed[node] = true;
            }
            break;
        case MicroBc::Periodic: {
            if constexpr (Dim == 1) {
                // the two end points are the corners
                fixed[0] = fixed[n - 1] = true;
            } else {
                pair_sides(rve_mesh, Side::XMin, Side::XMax, 1, master);
                pair_sides(rve_mesh, Side::YMin, Side::YMax, 0, master);
                const int nx = rve_mesh.nodes_along(0);
                const int ny = rve_mesh.nodes_along(1);
                for (int corner : {0, nx - 1, (ny - 1) * nx, ny * nx - 1}) fixed[find_root(master, corner)] = true;
            }
            break;
        }
    }

    for (int node = 0; node < n; ++node) {
        const int root = find_root(master, node);
        if (root == node && !fixed[node]) map.node_to_free[node] = map.num_free_nodes++;
    }
    for (int node = 0; node < n; ++node) {
        const int root = find_root(master, node);
        if (root != node) map.node_to_free[node] = fixed[root] ? -1 : map.node_to_free[root];
    }
    return map;
}

template MicroDofMap apply_micro_bc<1>(MicroBc, const Mesh<1>&);
template MicroDofMap apply_micro_bc<2>(MicroBc, const Mesh<2>&);

}  // namespace fe2
