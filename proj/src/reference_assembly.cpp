#include "fe2/reference_assembly.hpp"

#include <vector>

namespace fe2::reference {

namespace {

struct Entry {
    int index;    // row/column in the global system, -1 when constrained
    int component;
    double grad[3];
};

template <int Dim>
Eigen::VectorXd fluctuation_basis(MacroBasisKind kind, const Vec<Dim>& xi) {
    if (kind == MacroBasisKind::Constant) return Eigen::VectorXd::Ones(1);
    return reference_shape<Dim>(macro_basis_order(kind), xi).values;
}

}  // namespace

template <int Dim>
GlobalSystem assemble(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, double load_factor,
                      bool with_jacobian) {
    const Mesh<Dim>& macro = model.macro_mesh();
    const Mesh<Dim>& rve = model.rve_mesh();
    const TwoScaleProblem<Dim>& problem = model.problem();
    const int nm = model.num_free_macro();
    const int mf = model.micro_free_dofs();
    const int n = nm + model.total_micro_dofs();
    const std::vector<int>& node_to_free = model.micro_dofs().node_to_free;

    GlobalSystem out;
    out.residual = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd f_ext = load_factor * model.unit_external_force();
    out.energy = -f_ext.dot(state.q);
    for (int dof = 0; dof < model.num_macro_dofs(); ++dof) {
        const int f = model.macro_free_index(dof);
        if (f >= 0) out.residual(f) -= f_ext(dof);
    }

    double volume = 0.0;
    const QuadratureRule<Dim> micro_rule =
        gauss_rule<Dim>(problem.micro_quadrature > 0 ? problem.micro_quadrature : rve.order + 1);
    for (int me = 0; me < rve.num_elements(); ++me) {
        for (std::size_t l = 0; l < micro_rule.size(); ++l) {
            volume += micro_rule.weights[l] * shape_values(rve, me, micro_rule.points[l]).det_jacobian;
        }
    }

    const QuadratureRule<Dim> macro_rule =
        gauss_rule<Dim>(problem.macro_quadrature > 0 ? problem.macro_quadrature : macro.order + 1);
    const bool dirac = problem.basis == MacroBasisKind::Dirac;
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<Entry> entries;

    for (int e = 0; e < macro.num_elements(); ++e) {
        const auto mnodes = macro.element(e);
        for (std::size_t k = 0; k < macro_rule.size(); ++k) {
            const ShapeValues<Dim> ms = shape_values(macro, e, macro_rule.points[k]);
            const double scale = macro_rule.weights[k] * ms.det_jacobian / volume;
            const int block = dirac ? e * static_cast<int>(macro_rule.size()) + static_cast<int>(k) : e;
            const Eigen::VectorXd R =
                dirac ? Eigen::VectorXd::Ones(1) : fluctuation_basis<Dim>(problem.basis, macro_rule.points[k]);
            const int offset = nm + model.block_offset(block);

            Tensor2<Dim> F = Tensor2<Dim>::Zero();
            for (std::size_t a = 0; a < mnodes.size(); ++a)
                for (int i = 0; i < Dim; ++i)
                    for (int J = 0; J < Dim; ++J) F(i, J) += state.q(mnodes[a] * Dim + i) * ms.gradients(a, J);

            for (int me = 0; me < rve.num_elements(); ++me) {
                const auto rnodes = rve.element(me);
                const MaterialModel<Dim>& material = *problem.materials[problem.rve_material[me]];
                for (std::size_t l = 0; l < micro_rule.size(); ++l) {
                    const ShapeValues<Dim> rs = shape_values(rve, me, micro_rule.points[l]);
                    const double wt = scale * micro_rule.weights[l] * rs.det_jacobian;

                    entries.clear();
                    for (std::size_t a = 0; a < mnodes.size(); ++a)
                        for (int i = 0; i < Dim; ++i) {
                            Entry en{model.macro_free_index(mnodes[a] * Dim + i), i, {0, 0, 0}};
                            for (int J = 0; J < Dim; ++J) en.grad[J] = ms.gradients(a, J);
                            entries.push_back(en);
                        }
                    Tensor2<Dim> Ft = F;
                    for (int b = 0; b < R.size(); ++b)
                        for (std::size_t a = 0; a < rnodes.size(); ++a) {
                            const int free = node_to_free[rnodes[a]];
                            for (int i = 0; i < Dim; ++i) {
                                Entry en{free < 0 ? -1 : offset + b * mf + free * Dim + i, i, {0, 0, 0}};
                                for (int J = 0; J < Dim; ++J) en.grad[J] = R(b) * rs.gradients(a, J);
                                if (free >= 0) {
                                    const double wv = state.w(en.index - nm);
                                    for (int J = 0; J < Dim; ++J) Ft(i, J) += wv * en.grad[J];
                                }
                                entries.push_back(en);
                            }
                        }

                    const double detF = jacobian<Dim>(Ft);
                    if (material.requires_positive_jacobian() && !(detF > 0.0)) throw NonPositiveJacobian(detF);
                    const MaterialResponse<Dim> resp = material.evaluate(Ft, rs.point);
                    out.energy += wt * resp.energy;

                    for (const Entry& r : entries) {
                        if (r.index < 0) continue;
                        double v = 0.0;
                        for (int J = 0; J < Dim; ++J) v += resp.stress(r.component, J) * r.grad[J];
                        out.residual(r.index) += wt * v;
                        if (!with_jacobian) continue;
                        for (const Entry& c : entries) {
                            if (c.index < 0) continue;
                            double kv = 0.0;
                            for (int J = 0; J < Dim; ++J)
                                for (int L = 0; L < Dim; ++L)
                                    kv += r.grad[J] *
                                          resp.tangent(flat_index<Dim>(r.component, J), flat_index<Dim>(c.component, L)) *
                                          c.grad[L];
                            if (kv != 0.0) triplets.emplace_back(r.index, c.index, wt * kv);
                        }
                    }
                }
            }
        }
    }
    if (with_jacobian) {
        out.jacobian.resize(n, n);
        out.jacobian.setFromTriplets(triplets.begin(), triplets.end());
    }
    return out;
}

template GlobalSystem assemble<1>(const TwoScaleModel<1>&, const TwoScaleState<1>&, double, bool);
template GlobalSystem assemble<2>(const TwoScaleModel<2>&, const TwoScaleState<2>&, double, bool);

}  // namespace fe2::reference
