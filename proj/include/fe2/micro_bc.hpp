#ifndef FE2_MICRO_BC_HPP
#define FE2_MICRO_BC_HPP

#include "fe2/mesh.hpp"

#include <string>
#include <vector>

namespace fe2 {

/// Ways of making the volume average of the fluctuation gradient vanish:
/// Taylor (w = 0 everywhere), homogeneous boundary (w = 0 on the boundary)
/// and periodic (opposite boundary nodes coupled, corners fixed).
enum class MicroBc { Taylor, HomogeneousBoundary, Periodic };

std::string to_string(MicroBc mode);
MicroBc micro_bc_from_string(const std::string& name);

/// Reduction from micro nodes to free nodes. All components of a node share
/// the same status, so free dof = free_node * Dim + component.
struct MicroDofMap {
    std::vector<int> node_to_free;  // -1 for nodes held at zero
    int num_free_nodes = 0;

    int free_dofs(int dim) const { return num_free_nodes * dim; }
};

/// Periodic pairing matches opposite-edge nodes by coordinate with an
/// absolute tolerance of 1e-9 and throws std::invalid_argument on a mismatch.
template <int Dim>
MicroDofMap apply_micro_bc(MicroBc mode, const Mesh<Dim>& rve_mesh);

}  // namespace fe2

#endif
