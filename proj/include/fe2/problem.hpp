#ifndef FE2_PROBLEM_HPP
#define FE2_PROBLEM_HPP

#include "fe2/materials.hpp"
#include "fe2/mesh.hpp"
#include "fe2/micro_bc.hpp"
#include "fe2/quadrature.hpp"

#include <Eigen/Sparse>

#include <memory>
#include <string>
#include <vector>

namespace fe2 {

/// Interpolation of the fluctuation field along the macro coordinate.
/// Dirac: one fluctuation field per macro quadrature point (classical FE2).
/// Constant/Linear/Quadratic: Lagrange polynomials on each macro element,
/// discontinuous across element boundaries.
enum class MacroBasisKind { Dirac, Constant, Linear, Quadratic };

std::string to_string(MacroBasisKind kind);
MacroBasisKind macro_basis_from_string(const std::string& name);

/// Polynomial order of the discontinuous bases; -1 for Dirac.
int macro_basis_order(MacroBasisKind kind);

struct DirichletValue {
    int node = 0;
    int component = 0;
    double value = 0.0;
};

template <int Dim>
struct TractionLoad {
    std::vector<std::vector<int>> facets;
    Vec<Dim> traction = Vec<Dim>::Zero();
};

template <int Dim>
struct TwoScaleProblem {
    Mesh<Dim> macro_mesh;
    Mesh<Dim> rve_mesh;
    std::vector<std::shared_ptr<const MaterialModel<Dim>>> materials;
    std::vector<int> rve_material;  // per micro element, index into materials

    MacroBasisKind basis = MacroBasisKind::Dirac;
    MicroBc micro_bc = MicroBc::Periodic;

    std::vector<DirichletValue> dirichlet;  // prescribed deformed positions
    Vec<Dim> body_load = Vec<Dim>::Zero();
    std::vector<TractionLoad<Dim>> tractions;

    // Gauss points per direction; 0 selects order + 1 of the respective mesh.
    int macro_quadrature = 0;
    int micro_quadrature = 0;
};

template <int Dim>
struct TwoScaleState {
    Eigen::VectorXd q;  // deformed macro nodal positions, node-major (n_nodes * Dim)
    Eigen::VectorXd w;  // free fluctuation coefficients, block-major
};

/// Node-major (nodes x Dim) gradient table as stored in the micro cache.
template <int Dim>
using GradientMatrix = Eigen::Matrix<double, Eigen::Dynamic, Dim, (Dim == 1 ? Eigen::ColMajor : Eigen::RowMajor)>;

/// Macro quadrature point with everything the assembly needs.
template <int Dim>
struct MacroPoint {
    int element = 0;
    Vec<Dim> X;
    double weight = 0.0;  // eta_k * det J
    Eigen::VectorXd N;
    Eigen::Matrix<double, Eigen::Dynamic, Dim> dN;
};

/// A diagonal block of the micro-micro tangent: the fluctuation unknowns of
/// one RVE instance (Dirac) or of one macro element (polynomial bases).
struct FluctuationBlock {
    int element = 0;
    int first_point = 0;  // index into TwoScaleModel::macro_points
    int num_points = 0;
};

/// Immutable discretization of a two-scale problem: quadrature caches, dof
/// maps, block layout and the sparsity pattern shared by all micro blocks.
template <int Dim>
class TwoScaleModel {
public:
    static constexpr int max_local_dofs = 32;

    explicit TwoScaleModel(TwoScaleProblem<Dim> problem);

    const TwoScaleProblem<Dim>& problem() const { return problem_; }
    const Mesh<Dim>& macro_mesh() const { return problem_.macro_mesh; }
    const Mesh<Dim>& rve_mesh() const { return problem_.rve_mesh; }

    // macro side
    int num_macro_dofs() const { return macro_mesh().num_nodes() * Dim; }
    int num_free_macro() const { return num_free_macro_; }
    int macro_free_index(int dof) const { return macro_free_[dof]; }
    const std::vector<int>& macro_free_map() const { return macro_free_; }
    const std::vector<MacroPoint<Dim>>& macro_points() const { return macro_points_; }
    int points_per_element() const { return points_per_element_; }
    const Eigen::VectorXd& unit_external_force() const { return external_force_; }

    // micro side
    double rve_volume() const { return rve_volume_; }
    const MicroDofMap& micro_dofs() const { return micro_dofs_; }
    int micro_free_dofs() const { return micro_dofs_.free_dofs(Dim); }
    int num_micro_points() const { return static_cast<int>(micro_weight_.size()); }
    int micro_points_per_element() const { return micro_points_per_element_; }
    int micro_nodes_per_element() const { return rve_mesh().nodes_per_element(); }
    double micro_weight(int point) const { return micro_weight_[point]; }
    const Vec<Dim>& micro_point(int point) const { return micro_X_[point]; }
    /// Physical shape gradients at a micro point, (nodes_per_element x Dim).
    Eigen::Map<const GradientMatrix<Dim>> micro_gradients(int point) const;
    /// Free micro dof per (element, local node, component), -1 when held at zero.
    const int* micro_element_dofs(int element) const;
    const MaterialModel<Dim>& micro_material(int element) const;

    // fluctuation blocks
    MacroBasisKind basis() const { return problem_.basis; }
    int num_basis() const { return num_basis_; }
    int num_blocks() const { return static_cast<int>(blocks_.size()); }
    const FluctuationBlock& block(int b) const { return blocks_[b]; }
    int block_size() const { return num_basis_ * micro_free_dofs(); }
    int block_offset(int b) const { return b * block_size(); }
    int total_micro_dofs() const { return num_blocks() * block_size(); }
    /// Value of basis function `basis` of the block at its `point`-th point.
    double basis_value(int point_in_block, int basis) const;
    /// Value of the basis functions of an element at an arbitrary reference point.
    Eigen::VectorXd basis_at(const Vec<Dim>& xi) const;

    /// Block-matrix sparsity pattern (values zero) and per-entry scatter map:
    /// index (((element * nb + b) * nb + c) * nl + i) * nl + j into valuePtr.
    const Eigen::SparseMatrix<double>& block_pattern() const { return pattern_; }
    const std::vector<int>& block_scatter() const { return scatter_; }

    TwoScaleState<Dim> initial_state() const;

private:
    void build_macro();
    void build_micro();
    void build_blocks();
    void build_pattern();

    TwoScaleProblem<Dim> problem_;

    std::vector<int> macro_free_;
    int num_free_macro_ = 0;
    std::vector<MacroPoint<Dim>> macro_points_;
    int points_per_element_ = 0;
    Eigen::VectorXd external_force_;

    MicroDofMap micro_dofs_;
    double rve_volume_ = 0.0;
    int micro_points_per_element_ = 0;
    std::vector<double> micro_weight_;
    std::vector<Vec<Dim>> micro_X_;
    std::vector<double> micro_grad_;
    std::vector<int> micro_element_dofs_;

    int num_basis_ = 1;
    std::vector<FluctuationBlock> blocks_;
    Eigen::MatrixXd basis_values_;  // (points in block) x (num_basis)

    Eigen::SparseMatrix<double> pattern_;
    std::vector<int> scatter_;
};

}  // namespace fe2

#endif
