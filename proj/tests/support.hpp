#ifndef FE2_TESTS_SUPPORT_HPP
#define FE2_TESTS_SUPPORT_HPP

#include "fe2/assembly.hpp"
#include "fe2/materials.hpp"
#include "fe2/mesh.hpp"
#include "fe2/problem.hpp"

#include <Eigen/Sparse>

#include <memory>
#include <random>

namespace fe2::testing {

// Two-material 2D toy: macro nx x ny box clamped on the left with a traction
// on the right, RVE n x n with material 2 in the middle column.
// macro_order 0 picks the lowest order that resolves the basis.
inline TwoScaleProblem<2> toy_problem_2d(MacroBasisKind basis, MicroBc bc, int macro_nx = 2, int macro_ny = 1,
                                         int rve_n = 3, int macro_order = 0) {
    if (macro_order == 0) macro_order = basis == MacroBasisKind::Quadratic ? 2 : 1;
    TwoScaleProblem<2> p;
    p.macro_mesh = build_box_mesh<2>(Vec<2>(0.0, 0.0), Vec<2>(2.0, 1.0), {macro_nx, macro_ny}, macro_order);
    p.rve_mesh = build_rve_mesh(-1.0, 1.0, rve_n, rve_n);
    p.materials = {std::make_shared<CookMaterial>(1), std::make_shared<CookMaterial>(2)};
    p.rve_material.assign(p.rve_mesh.num_elements(), 0);
    for (int e = 0; e < p.rve_mesh.num_elements(); ++e) {
        if (e % rve_n == rve_n / 2) p.rve_material[e] = 1;
    }
    p.basis = basis;
    p.micro_bc = bc;
    for (int node : boundary_nodes(p.macro_mesh, Side::XMin)) {
        for (int i = 0; i < 2; ++i) p.dirichlet.push_back({node, i, p.macro_mesh.nodes[node](i)});
    }
    p.tractions.push_back({boundary_facets(p.macro_mesh, Side::XMax), Vec<2>(-0.5, 1.0)});
    return p;
}

inline TwoScaleProblem<1> toy_problem_1d(MacroBasisKind basis, MicroBc bc, int macro_n = 3, int rve_n = 4,
                                         int order = 1) {
    TwoScaleProblem<1> p;
    p.macro_mesh = build_interval_mesh(10.0, macro_n, order);
    p.rve_mesh = build_interval_mesh(1.0, rve_n, order);
    p.materials = {std::make_shared<Benchmark1DMaterial>()};
    p.rve_material.assign(p.rve_mesh.num_elements(), 0);
    p.basis = basis;
    p.micro_bc = bc;
    p.dirichlet.push_back({0, 0, 0.0});
    p.dirichlet.push_back({p.macro_mesh.num_nodes() - 1, 0, 12.0});
    p.body_load = Vec<1>(1.0);
    return p;
}

template <int Dim>
TwoScaleState<Dim> perturbed_state(const TwoScaleModel<Dim>& model, std::mt19937_64& rng, double q_amp = 0.05,
                                   double w_amp = 0.02) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TwoScaleState<Dim> s = model.initial_state();
    for (int d = 0; d < model.num_macro_dofs(); ++d) {
        if (model.macro_free_index(d) >= 0) s.q(d) += q_amp * u(rng);
    }
    for (Eigen::Index i = 0; i < s.w.size(); ++i) s.w(i) = w_amp * u(rng);
    return s;
}

// Full residual [r_macro; r_micro].
template <int Dim>
Eigen::VectorXd full_residual(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& s, double load = 1.0) {
    const Residuals r = assemble_residuals(model, s, load);
    Eigen::VectorXd out(r.r_macro.size() + r.r_micro.size());
    out << r.r_macro, r.r_micro;
    return out;
}

// Applies a step on the unknowns [free q; w].
template <int Dim>
TwoScaleState<Dim> shifted(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& s, int index, double h) {
    TwoScaleState<Dim> out = s;
    const int nm = model.num_free_macro();
    if (index < nm) {
        for (int d = 0; d < model.num_macro_dofs(); ++d) {
            if (model.macro_free_index(d) == index) out.q(d) += h;
        }
    } else {
        out.w(index - nm) += h;
    }
    return out;
}

template <int Dim>
Eigen::MatrixXd fd_jacobian(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& s, double h = 1e-6) {
    const int n = model.num_free_macro() + model.total_micro_dofs();
    Eigen::MatrixXd J(n, n);
    for (int c = 0; c < n; ++c) {
        J.col(c) = (full_residual(model, shifted(model, s, c, h)) - full_residual(model, shifted(model, s, c, -h))) /
                   (2.0 * h);
    }
    return J;
}

inline double relative_difference(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double scale = std::max(1e-300, b.norm());
    return (a - b).norm() / scale;
}

}  // namespace fe2::testing

#endif
