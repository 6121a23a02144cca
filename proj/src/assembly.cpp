#include "fe2/assembly.hpp"

#include "fe2/parallel.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fe2 {

namespace {

constexpr int max_nl = 32;

template <int Dim>
using BMatrix = Eigen::Matrix<double, Dim * Dim, Eigen::Dynamic, (Dim == 1 ? Eigen::RowMajor : Eigen::ColMajor),
                              Dim * Dim, max_nl>;
template <int Dim>
using BtMatrix = Eigen::Matrix<double, Eigen::Dynamic, Dim * Dim, Eigen::ColMajor, max_nl, Dim * Dim>;
using LocalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, max_nl, max_nl>;
using LocalVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, max_nl, 1>;

template <int Dim>
Eigen::Matrix<double, Dim * Dim, 1> flatten(const Tensor2<Dim>& A) {
    Eigen::Matrix<double, Dim * Dim, 1> out;
    for (int i = 0; i < Dim; ++i)
        for (int J = 0; J < Dim; ++J) out(flat_index<Dim>(i, J)) = A(i, J);
    return out;
}

// B(iJ, a*Dim + i) = dN_a/dX_J, so that grad u = B u_local (flattened)
template <int Dim, class Grad>
void gradient_operator(const Grad& grads, int n_nodes, BMatrix<Dim>& B) {
    B.setZero(Dim * Dim, n_nodes * Dim);
    for (int a = 0; a < n_nodes; ++a)
        for (int i = 0; i < Dim; ++i)
            for (int J = 0; J < Dim; ++J) B(flat_index<Dim>(i, J), a * Dim + i) = grads(a, J);
}

template <int Dim>
void check_orientation(const Tensor2<Dim>& F) {
    const double J = jacobian<Dim>(F);
    if (!(J > 0.0)) throw NonPositiveJacobian(J);
}

}  // namespace

template <int Dim>
Tensor2<Dim> macro_gradient(const TwoScaleModel<Dim>& model, const Eigen::VectorXd& q, int point) {
    const MacroPoint<Dim>& mp = model.macro_points()[point];
    const auto nodes = model.macro_mesh().element(mp.element);
    Tensor2<Dim> F = Tensor2<Dim>::Zero();
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        F += q.template segment<Dim>(nodes[a] * Dim) * mp.dN.row(a);
    }
    return F;
}

template <int Dim>
Eigen::VectorXd point_fluctuation(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, int point) {
    if (model.basis() == MacroBasisKind::Dirac) {
        return state.w.segment(model.block_offset(point), model.block_size());
    }
    const int mf = model.micro_free_dofs();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mf);
    const int block = model.macro_points()[point].element;
    const int k = point - model.block(block).first_point;
    for (int b = 0; b < model.num_basis(); ++b) {
        w += model.basis_value(k, b) * state.w.segment(model.block_offset(block) + b * mf, mf);
    }
    return w;
}

template <int Dim>
void assemble_block(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, int block_id, KernelMode mode,
                    BlockSystem<Dim>& out) {
    constexpr int NF = Dim * Dim;
    const bool micro_tangent = mode != KernelMode::Residual;
    const bool full_tangent = mode == KernelMode::FullTangent;

    const FluctuationBlock& blk = model.block(block_id);
    const auto nodes = model.macro_mesh().element(blk.element);
    const int n_macro_nodes = static_cast<int>(nodes.size());
    const int nmac = n_macro_nodes * Dim;
    const int nb = model.num_basis();
    const int mf = model.micro_free_dofs();
    const int bs = model.block_size();
    const int npe = model.micro_nodes_per_element();
    const int nl = npe * Dim;
    const int nq = model.micro_points_per_element();
    const int n_micro = model.rve_mesh().num_elements();
    const double inv_volume = 1.0 / model.rve_volume();
    const auto w_block = state.w.segment(model.block_offset(block_id), bs);
    const std::vector<int>& scatter = model.block_scatter();

    out.energy = 0.0;
    out.scale = 0.0;
    out.macro_dofs.resize(nmac);
    for (int a = 0; a < n_macro_nodes; ++a)
        for (int i = 0; i < Dim; ++i) out.macro_dofs[a * Dim + i] = nodes[a] * Dim + i;
    out.r_macro.setZero(nmac);
    out.r_micro.setZero(bs);
    if (micro_tangent) {
        const Eigen::SparseMatrix<double>& pattern = model.block_pattern();
        if (out.L.rows() != bs || out.L.nonZeros() != pattern.nonZeros()) out.L = pattern;
        std::fill(out.L.valuePtr(), out.L.valuePtr() + out.L.nonZeros(), 0.0);
    }
    if (full_tangent) {
        out.K.setZero(nmac, nmac);
        out.D.setZero(nmac, bs);
        out.E.setZero(bs, nmac);
    }

    double* L_values = micro_tangent ? out.L.valuePtr() : nullptr;
    BMatrix<Dim> Bmac, Bmic;
    BMatrix<Dim> CB;
    BMatrix<Dim> G;     // sum wt C Bmic
    BtMatrix<Dim> H;    // sum wt Bmic^T C
    LocalMatrix S;      // sum wt Bmic^T C Bmic
    LocalVector g, w_local;
    LocalMatrix DE;
    LocalVector R(nb);

    for (int kp = 0; kp < blk.num_points; ++kp) {
        const int point = blk.first_point + kp;
        const MacroPoint<Dim>& mp = model.macro_points()[point];
        const double s = mp.weight * inv_volume;
        out.scale += s;
        const Tensor2<Dim> F = macro_gradient(model, state.q, point);
        gradient_operator<Dim>(mp.dN, n_macro_nodes, Bmac);
        for (int b = 0; b < nb; ++b) R(b) = model.basis_value(kp, b);

        Eigen::Matrix<double, NF, 1> P_sum = Eigen::Matrix<double, NF, 1>::Zero();
        Tensor4<Dim> C_sum = Tensor4<Dim>::Zero();

        for (int me = 0; me < n_micro; ++me) {
            const int* dofs = model.micro_element_dofs(me);
            const MaterialModel<Dim>& material = model.micro_material(me);
            w_local.setZero(nl);
            for (int al = 0; al < nl; ++al) {
                if (dofs[al] < 0) continue;
                for (int b = 0; b < nb; ++b) w_local(al) += R(b) * w_block(b * mf + dofs[al]);
            }
            g.setZero(nl);
            if (micro_tangent) S.setZero(nl, nl);
            if (full_tangent) {
                G.setZero(NF, nl);
                H.setZero(nl, NF);
            }
            for (int l = 0; l < nq; ++l) {
                const int mp_id = me * nq + l;
                const auto grads = model.micro_gradients(mp_id);
                Tensor2<Dim> Ft = F;
                for (int a = 0; a < npe; ++a)
                    for (int i = 0; i < Dim; ++i) Ft.row(i) += w_local(a * Dim + i) * grads.row(a);
                if (material.requires_positive_jacobian()) check_orientation<Dim>(Ft);
                const MaterialResponse<Dim> resp = material.evaluate(Ft, model.micro_point(mp_id));
                const double wt = s * model.micro_weight(mp_id);
                const Eigen::Matrix<double, NF, 1> P = flatten<Dim>(resp.stress);
                out.energy += wt * resp.energy;
                P_sum += wt * P;
                gradient_operator<Dim>(grads, npe, Bmic);
                g.noalias() += wt * (Bmic.transpose() * P);
                if (micro_tangent) {
                    CB.noalias() = resp.tangent * Bmic;
                    S.noalias() += wt * (Bmic.transpose() * CB);
                    if (full_tangent) {
                        C_sum += wt * resp.tangent;
                        G += wt * CB;
                        H.noalias() += wt * (Bmic.transpose() * resp.tangent);
                    }
                }
            }

            for (int b = 0; b < nb; ++b) {
                for (int al = 0; al < nl; ++al) {
                    if (dofs[al] >= 0) out.r_micro(b * mf + dofs[al]) += R(b) * g(al);
                }
            }
            if (micro_tangent) {
                const std::size_t base = static_cast<std::size_t>(me) * nb * nb * nl * nl;
                for (int b = 0; b < nb; ++b) {
                    for (int c = 0; c < nb; ++c) {
                        const double rr = R(b) * R(c);
                        const int* map = scatter.data() + base + (static_cast<std::size_t>(b) * nb + c) * nl * nl;
                        for (int i = 0; i < nl; ++i) {
                            if (dofs[i] < 0) continue;
                            for (int j = 0; j < nl; ++j) {
                                if (dofs[j] < 0) continue;
                                L_values[map[i * nl + j]] += rr * S(i, j);
                            }
                        }
                    }
                }
            }
            if (full_tangent) {
                DE.noalias() = Bmac.transpose() * G;  // nmac x nl
                for (int b = 0; b < nb; ++b) {
                    for (int al = 0; al < nl; ++al) {
                        if (dofs[al] >= 0) out.D.col(b * mf + dofs[al]) += R(b) * DE.col(al);
                    }
                }
                DE.noalias() = H * Bmac;  // nl x nmac
                for (int b = 0; b < nb; ++b) {
                    for (int al = 0; al < nl; ++al) {
                        if (dofs[al] >= 0) out.E.row(b * mf + dofs[al]) += R(b) * DE.row(al);
                    }
                }
            }
        }
        out.r_macro.noalias() += Bmac.transpose() * P_sum;
        if (full_tangent) out.K.noalias() += Bmac.transpose() * C_sum * Bmac;
    }
}

namespace {

int batch_size() { return std::max(16, 4 * max_threads()); }

}  // namespace

template <int Dim>
Residuals assemble_residuals(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, double load_factor) {
    Residuals res;
    Eigen::VectorXd r_full = -load_factor * model.unit_external_force();
    res.energy = r_full.dot(state.q);
    res.r_micro.setZero(model.total_micro_dofs());

    const int batch = batch_size();
    std::vector<BlockSystem<Dim>> slots(static_cast<std::size_t>(std::min(batch, std::max(1, model.num_blocks()))));
    batched_for(
        model.num_blocks(), batch,
        [&](int b, int slot) { assemble_block(model, state, b, KernelMode::Residual, slots[slot]); },
        [&](int b, int slot) {
            const BlockSystem<Dim>& sys = slots[slot];
            for (std::size_t a = 0; a < sys.macro_dofs.size(); ++a) r_full(sys.macro_dofs[a]) += sys.r_macro(a);
            res.r_micro.segment(model.block_offset(b), model.block_size()) = sys.r_micro;
            res.energy += sys.energy;
        });

    res.r_macro.resize(model.num_free_macro());
    for (int dof = 0; dof < model.num_macro_dofs(); ++dof) {
        const int f = model.macro_free_index(dof);
        if (f >= 0) res.r_macro(f) = r_full(dof);
    }
    return res;
}

Eigen::SparseMatrix<double> BlockTangent::full() const {
    const int nm = macro_size();
    const int nw = micro_size();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(K.nonZeros() + D.nonZeros() + E.nonZeros());
    auto add = [&](const Eigen::SparseMatrix<double>& M, int r0, int c0) {
        for (int k = 0; k < M.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it)
                t.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
    };
    add(K, 0, 0);
    add(D, 0, nm);
    add(E, nm, 0);
    for (std::size_t b = 0; b < L.size(); ++b) add(L[b], nm + block_offsets[b], nm + block_offsets[b]);
    Eigen::SparseMatrix<double> M(nm + nw, nm + nw);
    M.setFromTriplets(t.begin(), t.end());
    return M;
}

template <int Dim>
BlockTangent assemble_tangent(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state) {
    BlockTangent out;
    const int nm = model.num_free_macro();
    const int nw = model.total_micro_dofs();
    out.L.resize(model.num_blocks());
    out.block_offsets.resize(model.num_blocks());
    std::vector<Eigen::Triplet<double>> tk, td, te;

    const int batch = batch_size();
    std::vector<BlockSystem<Dim>> slots(static_cast<std::size_t>(std::min(batch, std::max(1, model.num_blocks()))));
    batched_for(
        model.num_blocks(), batch,
        [&](int b, int slot) { assemble_block(model, state, b, KernelMode::FullTangent, slots[slot]); },
        [&](int b, int slot) {
            const BlockSystem<Dim>& sys = slots[slot];
            const int off = model.block_offset(b);
            out.block_offsets[b] = off;
            out.L[b] = sys.L;
            const int nmac = static_cast<int>(sys.macro_dofs.size());
            for (int a = 0; a < nmac; ++a) {
                const int fa = model.macro_free_index(sys.macro_dofs[a]);
                if (fa < 0) continue;
                for (int c = 0; c < nmac; ++c) {
                    const int fc = model.macro_free_index(sys.macro_dofs[c]);
                    if (fc >= 0 && sys.K(a, c) != 0.0) tk.emplace_back(fa, fc, sys.K(a, c));
                }
                for (int j = 0; j < sys.D.cols(); ++j) {
                    if (sys.D(a, j) != 0.0) td.emplace_back(fa, off + j, sys.D(a, j));
                    if (sys.E(j, a) != 0.0) te.emplace_back(off + j, fa, sys.E(j, a));
                }
            }
        });

    out.K.resize(nm, nm);
    out.K.setFromTriplets(tk.begin(), tk.end());
    out.D.resize(nm, nw);
    out.D.setFromTriplets(td.begin(), td.end());
    out.E.resize(nw, nm);
    out.E.setFromTriplets(te.begin(), te.end());
    return out;
}

namespace {

// Single-RVE quantities at one macro point for a given fluctuation vector,
// without any macro weight.
template <int Dim>
struct PointResponse {
    Tensor2<Dim> P_avg;
    Eigen::VectorXd g;                  // sum_l wt B^T P over the RVE
    Eigen::SparseMatrix<double> S;      // sum_l wt B^T C B
    Eigen::MatrixXd G;                  // sum_l wt B^T C, (mf x Dim^2)
};

template <int Dim>
PointResponse<Dim> point_response(const TwoScaleModel<Dim>& model, const Tensor2<Dim>& F, const Eigen::VectorXd& w,
                                  bool tangent) {
    constexpr int NF = Dim * Dim;
    const int mf = model.micro_free_dofs();
    const int npe = model.micro_nodes_per_element();
    const int nl = npe * Dim;
    const int nq = model.micro_points_per_element();
    PointResponse<Dim> out;
    Eigen::Matrix<double, NF, 1> P_sum = Eigen::Matrix<double, NF, 1>::Zero();
    out.g = Eigen::VectorXd::Zero(mf);
    out.G = Eigen::MatrixXd::Zero(mf, NF);
    std::vector<Eigen::Triplet<double>> t;
    BMatrix<Dim> B;
    for (int me = 0; me < model.rve_mesh().num_elements(); ++me) {
        const int* dofs = model.micro_element_dofs(me);
        for (int l = 0; l < nq; ++l) {
            const int p = me * nq + l;
            const auto grads = model.micro_gradients(p);
            Tensor2<Dim> Ft = F;
            for (int a = 0; a < npe; ++a)
                for (int i = 0; i < Dim; ++i) {
                    const int d = dofs[a * Dim + i];
                    if (d >= 0) Ft.row(i) += w(d) * grads.row(a);
                }
            if (model.micro_material(me).requires_positive_jacobian()) check_orientation<Dim>(Ft);
            const MaterialResponse<Dim> resp = model.micro_material(me).evaluate(Ft, model.micro_point(p));
            const double wt = model.micro_weight(p);
            const Eigen::Matrix<double, NF, 1> P = flatten<Dim>(resp.stress);
            P_sum += wt * P;
            gradient_operator<Dim>(grads, npe, B);
            const LocalVector gl = B.transpose() * P;
            for (int al = 0; al < nl; ++al)
                if (dofs[al] >= 0) out.g(dofs[al]) += wt * gl(al);
            if (!tangent) continue;
            const LocalMatrix Sl = B.transpose() * resp.tangent * B;
            const BtMatrix<Dim> Gl = B.transpose() * resp.tangent;
            for (int i = 0; i < nl; ++i) {
                if (dofs[i] < 0) continue;
                out.G.row(dofs[i]) += wt * Gl.row(i);
                for (int j = 0; j < nl; ++j)
                    if (dofs[j] >= 0) t.emplace_back(dofs[i], dofs[j], wt * Sl(i, j));
            }
        }
    }
    P_sum /= model.rve_volume();
    for (int i = 0; i < Dim; ++i)
        for (int J = 0; J < Dim; ++J) out.P_avg(i, J) = P_sum(flat_index<Dim>(i, J));
    if (tangent) {
        out.S.resize(mf, mf);
        out.S.setFromTriplets(t.begin(), t.end());
    }
    return out;
}

}  // namespace

template <int Dim>
Tensor2<Dim> average_stress(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, int point) {
    const Tensor2<Dim> F = macro_gradient(model, state.q, point);
    return point_response(model, F, point_fluctuation(model, state, point), false).P_avg;
}

template <int Dim>
HillMandelReport hill_mandel_check(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, int point,
                                   double equilibrium_tolerance) {
    const Tensor2<Dim> F = macro_gradient(model, state.q, point);
    const PointResponse<Dim> r = point_response(model, F, point_fluctuation(model, state, point), true);
    HillMandelReport report;
    report.micro_residual = r.g.norm() / model.rve_volume();
    report.at_equilibrium = report.micro_residual <= equilibrium_tolerance;
    if (model.micro_free_dofs() == 0) {
        report.gap = 0.0;
        return report;
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(r.S);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("RVE tangent is singular");
    // dw = -S^-1 G dF; averaged virtual work minus P : dF reduces to g . dw / |Omega|
    const Eigen::MatrixXd sensitivity = ldlt.solve(r.G);
    for (int c = 0; c < Dim * Dim; ++c) {
        const double gap = std::abs(r.g.dot(sensitivity.col(c))) / model.rve_volume();
        report.gap = std::max(report.gap, gap);
    }
    return report;
}

template <int Dim>
Eigen::VectorXd expand_fluctuation(const TwoScaleModel<Dim>& model, const Eigen::VectorXd& reduced) {
    const auto& map = model.micro_dofs().node_to_free;
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(map.size()) * Dim);
    for (std::size_t n = 0; n < map.size(); ++n) {
        if (map[n] < 0) continue;
        full.template segment<Dim>(n * Dim) = reduced.template segment<Dim>(map[n] * Dim);
    }
    return full;
}

#define FE2_INSTANTIATE(D)                                                                                           \
    template Tensor2<D> macro_gradient<D>(const TwoScaleModel<D>&, const Eigen::VectorXd&, int);                    \
    template Eigen::VectorXd point_fluctuation<D>(const TwoScaleModel<D>&, const TwoScaleState<D>&, int);           \
    template void assemble_block<D>(const TwoScaleModel<D>&, const TwoScaleState<D>&, int, KernelMode,              \
                                    BlockSystem<D>&);                                                               \
    template Residuals assemble_residuals<D>(const TwoScaleModel<D>&, const TwoScaleState<D>&, double);             \
    template BlockTangent assemble_tangent<D>(const TwoScaleModel<D>&, const TwoScaleState<D>&);                    \
    template Tensor2<D> average_stress<D>(const TwoScaleModel<D>&, const TwoScaleState<D>&, int);                   \
    template HillMandelReport hill_mandel_check<D>(const TwoScaleModel<D>&, const TwoScaleState<D>&, int, double);  \
    template Eigen::VectorXd expand_fluctuation<D>(const TwoScaleModel<D>&, const Eigen::VectorXd&);

FE2_INSTANTIATE(1)
FE2_INSTANTIATE(2)

}  // namespace fe2
