#include "fe2/problem.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <stdexcept>

namespace fe2 {

std::string to_string(MacroBasisKind kind) {
    switch (kind) {
        case MacroBasisKind::Dirac: return "dirac";
        case MacroBasisKind::Constant: return "constant";
        case MacroBasisKind::Linear: return "linear";
        case MacroBasisKind::Quadratic: return "quadratic";
    }
    return "?";
}

MacroBasisKind macro_basis_from_string(const std::string& name) {
    if (name == "dirac" || name == "delta" || name == "d") return MacroBasisKind::Dirac;
    if (name == "constant" || name == "0") return MacroBasisKind::Constant;
    if (name == "linear" || name == "1") return MacroBasisKind::Linear;
    if (name == "quadratic" || name == "2") return MacroBasisKind::Quadratic;
    throw std::invalid_argument("unknown macro fluctuation basis '" + name + "'");
}

int macro_basis_order(MacroBasisKind kind) {
    switch (kind) {
        case MacroBasisKind::Dirac: return -1;
        case MacroBasisKind::Constant: return 0;
        case MacroBasisKind::Linear: return 1;
        case MacroBasisKind::Quadratic: return 2;
    }
    return -1;
}

template <int Dim>
TwoScaleModel<Dim>::TwoScaleModel(TwoScaleProblem<Dim> problem) : problem_(std::move(problem)) {
    if (problem_.materials.empty()) throw std::invalid_argument("two-scale problem without micro materials");
    if (static_cast<int>(problem_.rve_material.size()) != rve_mesh().num_elements()) {
        throw std::invalid_argument("micro material assignment does not match the RVE mesh");
    }
    for (int m : problem_.rve_material) {
        if (m < 0 || m >= static_cast<int>(problem_.materials.size()) || !problem_.materials[m]) {
            throw std::invalid_argument("micro element refers to a missing material");
        }
    }
    if (rve_mesh().nodes_per_element() * Dim > max_local_dofs) {
        throw std::invalid_argument("micro element order too high");
    }
    if (macro_mesh().nodes_per_element() * Dim > max_local_dofs) {
        throw std::invalid_argument("macro element order too high");
    }
    build_macro();
    build_micro();
    build_blocks();
    build_pattern();
}

template <int Dim>
void TwoScaleModel<Dim>::build_macro() {
    const Mesh<Dim>& mesh = macro_mesh();
    macro_free_.assign(num_macro_dofs(), 0);
    for (const DirichletValue& bc : problem_.dirichlet) {
        if (bc.node < 0 || bc.node >= mesh.num_nodes() || bc.component < 0 || bc.component >= Dim) {
            throw std::invalid_argument("Dirichlet condition outside the macro mesh");
        }
        macro_free_[bc.node * Dim + bc.component] = -1;
    }
    num_free_macro_ = 0;
    for (int& idx : macro_free_) idx = (idx == -1) ? -1 : num_free_macro_++;

    const int order = problem_.macro_quadrature > 0 ? problem_.macro_quadrature : mesh.order + 1;
    const QuadratureRule<Dim> rule = gauss_rule<Dim>(order);
    points_per_element_ = static_cast<int>(rule.size());
    macro_points_.clear();
    macro_points_.reserve(static_cast<std::size_t>(mesh.num_elements()) * rule.size());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        for (std::size_t q = 0; q < rule.size(); ++q) {
            ShapeValues<Dim> sv = shape_values(mesh, e, rule.points[q]);
            MacroPoint<Dim> point;
            point.element = e;
            point.X = sv.point;
            point.weight = rule.weights[q] * sv.det_jacobian;
            point.N = std::move(sv.values);
            point.dN = std::move(sv.gradients);
            macro_points_.push_back(std::move(point));
        }
    }

    external_force_ = Eigen::VectorXd::Zero(num_macro_dofs());
    if (!problem_.body_load.isZero(0.0)) {
        for (const MacroPoint<Dim>& point : macro_points_) {
            const auto nodes = mesh.element(point.element);
            for (std::size_t a = 0; a < nodes.size(); ++a) {
                external_force_.template segment<Dim>(nodes[a] * Dim) += point.N(a) * point.weight * problem_.body_load;
            }
        }
    }
    for (const TractionLoad<Dim>& load : problem_.tractions) {
        for (const auto& facet : load.facets) {
            if constexpr (Dim == 1) {
                for (int node : facet) external_force_.template segment<Dim>(node * Dim) += load.traction;
            } else {
                const int facet_order = static_cast<int>(facet.size()) - 1;
                const QuadratureRule<1> line = gauss_rule<1>(facet_order + 1);
                for (std::size_t q = 0; q < line.size(); ++q) {
                    const ReferenceShape<1> ref = reference_shape<1>(facet_order, line.points[q]);
                    Vec<Dim> tangent = Vec<Dim>::Zero();
                    for (std::size_t a = 0; a < facet.size(); ++a) tangent += ref.gradients(a, 0) * mesh.nodes[facet[a]];
                    const double ds = line.weights[q] * tangent.norm();
                    for (std::size_t a = 0; a < facet.size(); ++a) {
                        external_force_.template segment<Dim>(facet[a] * Dim) += ref.values(a) * ds * load.traction;
                    }
                }
            }
        }
    }
}

template <int Dim>
void TwoScaleModel<Dim>::build_micro() {
    const Mesh<Dim>& mesh = rve_mesh();
    micro_dofs_ = apply_micro_bc<Dim>(problem_.micro_bc, mesh);

    const int order = problem_.micro_quadrature > 0 ? problem_.micro_quadrature : mesh.order + 1;
    const QuadratureRule<Dim> rule = gauss_rule<Dim>(order);
    micro_points_per_element_ = static_cast<int>(rule.size());
    const int npe = mesh.nodes_per_element();
    const std::size_t n_points = static_cast<std::size_t>(mesh.num_elements()) * rule.size();
    micro_weight_.resize(n_points);
    micro_X_.resize(n_points);
    micro_grad_.resize(n_points * npe * Dim);
    rve_volume_ = 0.0;
    for (int e = 0; e < mesh.num_elements(); ++e) {
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const std::size_t p = e * rule.size() + q;
            const ShapeValues<Dim> sv = shape_values(mesh, e, rule.points[q]);
            micro_weight_[p] = rule.weights[q] * sv.det_jacobian;
            micro_X_[p] = sv.point;
            for (int a = 0; a < npe; ++a) {
                for (int d = 0; d < Dim; ++d) micro_grad_[(p * npe + a) * Dim + d] = sv.gradients(a, d);
            }
            rve_volume_ += micro_weight_[p];
        }
    }

    micro_element_dofs_.resize(static_cast<std::size_t>(mesh.num_elements()) * npe * Dim);
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto nodes = mesh.element(e);
        for (int a = 0; a < npe; ++a) {
            const int free = micro_dofs_.node_to_free[nodes[a]];
            for (int i = 0; i < Dim; ++i) {
                micro_element_dofs_[(static_cast<std::size_t>(e) * npe + a) * Dim + i] = free < 0 ? -1 : free * Dim + i;
            }
        }
    }
}

template <int Dim>
void TwoScaleModel<Dim>::build_blocks() {
    blocks_.clear();
    const int n_elements = macro_mesh().num_elements();
    if (problem_.basis == MacroBasisKind::Dirac) {
        num_basis_ = 1;
        for (int p = 0; p < static_cast<int>(macro_points_.size()); ++p) {
            blocks_.push_back({macro_points_[p].element, p, 1});
        }
        basis_values_ = Eigen::MatrixXd::Ones(1, 1);
        return;
    }
    for (int e = 0; e < n_elements; ++e) blocks_.push_back({e, e * points_per_element_, points_per_element_});

    const int order = problem_.macro_quadrature > 0 ? problem_.macro_quadrature : macro_mesh().order + 1;
    const QuadratureRule<Dim> rule = gauss_rule<Dim>(order);
    const Eigen::VectorXd first = basis_at(rule.points[0]);
    num_basis_ = static_cast<int>(first.size());
    basis_values_.resize(points_per_element_, num_basis_);
    for (int q = 0; q < points_per_element_; ++q) basis_values_.row(q) = basis_at(rule.points[q]).transpose();
    // more modes than points makes every micro block singular
    if (Eigen::FullPivLU<Eigen::MatrixXd>(basis_values_).rank() < num_basis_) {
        throw std::invalid_argument("macro quadrature does not resolve the " + to_string(problem_.basis) +
                                    " fluctuation basis");
    }
}

template <int Dim>
Eigen::VectorXd TwoScaleModel<Dim>::basis_at(const Vec<Dim>& xi) const {
    switch (problem_.basis) {
        case MacroBasisKind::Dirac:
            throw std::logic_error("the Dirac basis has no values away from its quadrature points");
        case MacroBasisKind::Constant:
            return Eigen::VectorXd::Ones(1);
        default:
            return reference_shape<Dim>(macro_basis_order(problem_.basis), xi).values;
    }
}

template <int Dim>
double TwoScaleModel<Dim>::basis_value(int point_in_block, int basis) const {
    return basis_values_(point_in_block, basis);
}

template <int Dim>
void TwoScaleModel<Dim>::build_pattern() {
    const int n_elements = rve_mesh().num_elements();
    const int nl = micro_nodes_per_element() * Dim;
    const int nb = num_basis_;
    const int mf = micro_free_dofs();

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n_elements) * nb * nb * nl * nl);
    for (int e = 0; e < n_elements; ++e) {
        const int* dofs = micro_element_dofs(e);
        for (int b = 0; b < nb; ++b) {
            for (int c = 0; c < nb; ++c) {
                for (int i = 0; i < nl; ++i) {
                    if (dofs[i] < 0) continue;
                    for (int j = 0; j < nl; ++j) {
                        if (dofs[j] < 0) continue;
                        triplets.emplace_back(b * mf + dofs[i], c * mf + dofs[j], 0.0);
                    }
                }
            }
        }
    }
    pattern_.resize(block_size(), block_size());
    pattern_.setFromTriplets(triplets.begin(), triplets.end());
    pattern_.makeCompressed();

    const int* outer = pattern_.outerIndexPtr();
    const int* inner = pattern_.innerIndexPtr();
    scatter_.assign(static_cast<std::size_t>(n_elements) * nb * nb * nl * nl, -1);
    for (int e = 0; e < n_elements; ++e) {
        const int* dofs = micro_element_dofs(e);
        for (int b = 0; b < nb; ++b) {
            for (int c = 0; c < nb; ++c) {
                for (int i = 0; i < nl; ++i) {
                    if (dofs[i] < 0) continue;
                    for (int j = 0; j < nl; ++j) {
                        if (dofs[j] < 0) continue;
                        const int row = b * mf + dofs[i];
                        const int col = c * mf + dofs[j];
                        const int* pos = std::lower_bound(inner + outer[col], inner + outer[col + 1], row);
                        scatter_[((((static_cast<std::size_t>(e) * nb + b) * nb + c) * nl + i) * nl) + j] =
                            static_cast<int>(pos - inner);
                    }
                }
            }
        }
    }
}

template <int Dim>
Eigen::Map<const GradientMatrix<Dim>> TwoScaleModel<Dim>::micro_gradients(
    int point) const {
    const int npe = micro_nodes_per_element();
    return {micro_grad_.data() + static_cast<std::size_t>(point) * npe * Dim, npe, Dim};
}

template <int Dim>
const int* TwoScaleModel<Dim>::micro_element_dofs(int element) const {
    return micro_element_dofs_.data() + static_cast<std::size_t>(element) * micro_nodes_per_element() * Dim;
}

template <int Dim>
const MaterialModel<Dim>& TwoScaleModel<Dim>::micro_material(int element) const {
    return *problem_.materials[problem_.rve_material[element]];
}

template <int Dim>
TwoScaleState<Dim> TwoScaleModel<Dim>::initial_state() const {
    TwoScaleState<Dim> state;
    state.q.resize(num_macro_dofs());
    for (int n = 0; n < macro_mesh().num_nodes(); ++n) state.q.template segment<Dim>(n * Dim) = macro_mesh().nodes[n];
    for (const DirichletValue& bc : problem_.dirichlet) state.q(bc.node * Dim + bc.component) = bc.value;
    state.w = Eigen::VectorXd::Zero(total_micro_dofs());
    return state;
}

template class TwoScaleModel<1>;
template class TwoScaleModel<2>;

}  // namespace fe2
