#ifndef FE2_ASSEMBLY_HPP
#define FE2_ASSEMBLY_HPP

#include "fe2/problem.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace fe2 {

enum class KernelMode {
    Residual,      // energy and residuals only
    MicroTangent,  // plus the diagonal micro block L
    FullTangent,   // plus K, D and E
};

/// Contributions of one fluctuation block. The macro parts are local to the
/// block's macro element; `macro_dofs` holds their global (unreduced) ids.
/// Micro rows are gradients of the discrete energy, so every block carries
/// the factor eta_k |det J| / |Omega| of its macro points; `scale` is the sum
/// of those factors.
template <int Dim>
struct BlockSystem {
    double energy = 0.0;
    double scale = 0.0;
    std::vector<int> macro_dofs;
    Eigen::VectorXd r_macro;
    Eigen::MatrixXd K;
    Eigen::VectorXd r_micro;
    Eigen::SparseMatrix<double> L;
    Eigen::MatrixXd D;  // macro x micro
    Eigen::MatrixXd E;  // micro x macro

    /// Residual of the block in the per-RVE normalization, i.e. the micro
    /// equilibrium integral without the macro quadrature weight.
    double normalized_micro_residual() const { return r_micro.norm() / scale; }
};

/// Throws NonPositiveJacobian when any micro point has det F <= 0.
template <int Dim>
void assemble_block(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, int block, KernelMode mode,
                    BlockSystem<Dim>& out);

struct Residuals {
    Eigen::VectorXd r_macro;  // free macro dofs, internal minus external
    Eigen::VectorXd r_micro;  // all blocks, block-major
    double energy = 0.0;      // internal minus external potential

    double macro_norm() const { return r_macro.norm(); }
    double micro_norm() const { return r_micro.norm(); }
};

template <int Dim>
Residuals assemble_residuals(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state,
                             double load_factor = 1.0);

struct BlockTangent {
    Eigen::SparseMatrix<double> K;               // free macro x free macro
    Eigen::SparseMatrix<double> D;               // free macro x micro
    Eigen::SparseMatrix<double> E;               // micro x free macro
    std::vector<Eigen::SparseMatrix<double>> L;  // one diagonal block per fluctuation block
    std::vector<int> block_offsets;

    int macro_size() const { return static_cast<int>(K.rows()); }
    int micro_size() const { return static_cast<int>(E.rows()); }
    /// The monolithic matrix [K D; E L].
    Eigen::SparseMatrix<double> full() const;
};

/// Stores every block; meant for tests and small problems. The solver
/// streams blocks through the same kernel instead.
template <int Dim>
BlockTangent assemble_tangent(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state);

/// Macro deformation gradient at a macro quadrature point.
template <int Dim>
Tensor2<Dim> macro_gradient(const TwoScaleModel<Dim>& model, const Eigen::VectorXd& q, int point);

/// Free fluctuation coefficients seen at a macro quadrature point, i.e.
/// sum_b R^b(X_k) w_b, with length micro_free_dofs().
template <int Dim>
Eigen::VectorXd point_fluctuation(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, int point);

/// Volume-averaged first Piola-Kirchhoff stress of the RVE at a macro point.
template <int Dim>
Tensor2<Dim> average_stress(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, int point);

struct HillMandelReport {
    double gap = 0.0;             // max over unit macro variations
    double micro_residual = 0.0;  // per-RVE normalized residual at the point
    bool at_equilibrium = true;
};

/// Compares the averaged micro virtual work with P : dF for the unit macro
/// variations dF, with the micro variation taken from the linearized RVE
/// response. Away from micro equilibrium the gap is reported and the
/// at_equilibrium flag cleared.
template <int Dim>
HillMandelReport hill_mandel_check(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, int point,
                                   double equilibrium_tolerance = 1e-8);

/// Full nodal fluctuation values at micro nodes (slaves copied, fixed nodes
/// zero) for a reduced coefficient vector of one RVE.
template <int Dim>
Eigen::VectorXd expand_fluctuation(const TwoScaleModel<Dim>& model, const Eigen::VectorXd& reduced);

}  // namespace fe2

#endif
