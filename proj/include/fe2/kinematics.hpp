#ifndef FE2_KINEMATICS_HPP
#define FE2_KINEMATICS_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fe2 {

template <int Dim>
using Tensor2 = Eigen::Matrix<double, Dim, Dim>;

/// Fourth-order tensor stored as an (n^2 x n^2) matrix. Rows and columns use
/// the row-major flattening (i, J) -> i * n + J of the second-order tensors.
template <int Dim>
using Tensor4 = Eigen::Matrix<double, Dim * Dim, Dim * Dim>;

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
constexpr int flat_index(int i, int J) {
    return i * Dim + J;
}

/// Raised whenever a deformation gradient with det F <= 0 is evaluated. The
/// solver treats this as divergence, every other caller as a hard error.
class NonPositiveJacobian : public std::runtime_error {
public:
    explicit NonPositiveJacobian(double jacobian)
        : std::runtime_error("non-positive Jacobian det F = " + std::to_string(jacobian)),
          jacobian_(jacobian) {}

    double jacobian() const noexcept { return jacobian_; }

private:
    double jacobian_;
};

template <int Dim>
struct KinematicState {
    Tensor2<Dim> F;
    Tensor2<Dim> H;  // cofactor, dJ/dF
    double J = 1.0;
};

/// [A xx B]_iJ = eps_ijk eps_JMN A_jM B_kN
Tensor2<3> tensor_cross(const Tensor2<3>& A, const Tensor2<3>& B);

/// Dynamic-size overload; throws std::invalid_argument unless both are 3x3.
Eigen::MatrixXd tensor_cross(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Cofactor without the orientation check. For n = 3 this is (F xx F) / 2,
/// for n = 2 the adjugate transpose and for n = 1 the constant 1.
template <int Dim>
Tensor2<Dim> cofactor(const Tensor2<Dim>& F) {
    if constexpr (Dim == 1) {
        return Tensor2<1>::Ones();
    } else if constexpr (Dim == 2) {
        Tensor2<2> H;
        H << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
        return H;
    } else {
        static_assert(Dim == 3, "dimension must be 1, 2 or 3");
        return 0.5 * tensor_cross(F, F);
    }
}

/// det F; for n = 3 evaluated as F : (F xx F) / 6.
template <int Dim>
double jacobian(const Tensor2<Dim>& F) {
    if constexpr (Dim == 1) {
        return F(0, 0);
    } else if constexpr (Dim == 2) {
        return F(0, 0) * F(1, 1) - F(0, 1) * F(1, 0);
    } else {
        return F.cwiseProduct(tensor_cross(F, F)).sum() / 6.0;
    }
}

template <int Dim>
KinematicState<Dim> kinematic_state(const Tensor2<Dim>& F) {
    KinematicState<Dim> state{F, cofactor<Dim>(F), jacobian<Dim>(F)};
    if (!(state.J > 0.0)) {
        throw NonPositiveJacobian(state.J);
    }
    return state;
}

/// Second derivative of det F with respect to F, flattened (d H_iJ / d F_kL).
template <int Dim>
Tensor4<Dim> jacobian_hessian() {
    Tensor4<Dim> out = Tensor4<Dim>::Zero();
    if constexpr (Dim == 2) {
        out(0, 3) = out(3, 0) = 1.0;
        out(1, 2) = out(2, 1) = -1.0;
    } else {
        static_assert(Dim == 1 || Dim == 2, "only needed for n <= 2");
    }
    return out;
}

}  // namespace fe2

#endif
