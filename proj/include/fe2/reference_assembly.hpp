#ifndef FE2_REFERENCE_ASSEMBLY_HPP
#define FE2_REFERENCE_ASSEMBLY_HPP

#include "fe2/problem.hpp"

#include <Eigen/Sparse>

namespace fe2::reference {

/// Residual and Jacobian of the whole two-scale system, ordered as
/// [free macro dofs; micro dofs], in the same scaling as the blocked kernel.
struct GlobalSystem {
    Eigen::VectorXd residual;
    Eigen::SparseMatrix<double> jacobian;
    double energy = 0.0;
};

/// Straightforward serial assembly. Shape functions and quadrature are
/// re-evaluated from the meshes instead of taken from the model caches;
/// only the dof numbering is shared.
template <int Dim>
GlobalSystem assemble(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, double load_factor,
                      bool with_jacobian);

}  // namespace fe2::reference

#endif
