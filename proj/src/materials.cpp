#include "fe2/materials.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace fe2 {

double Benchmark1DMaterial::stiffness(double X) {
    constexpr double pi = std::numbers::pi;
    return 20.0 / std::cos(2.0 * pi * X / 3.0 - pi / 3.0);
}

MaterialResponse<1> Benchmark1DMaterial::evaluate(const Tensor2<1>& F, const Vec<1>& X) const {
    const double lambda = stiffness(X(0));
    const double f = F(0, 0);
    MaterialResponse<1> out;
    out.energy = lambda * (f * f - 1.0);
    out.stress(0, 0) = 2.0 * lambda * f;
    out.tangent(0, 0) = 2.0 * lambda;
    return out;
}

MaterialResponse<1> evaluate_benchmark_1d(double F, double X) {
    return Benchmark1DMaterial{}.evaluate(Tensor2<1>::Constant(F), Vec<1>::Constant(X));
}

CookParameters cook_parameters(int which) {
    switch (which) {
        case 1:
            return {27.0, 18.0, 60.0};
        case 2:
            return {13.5, 6.5, 30.0};
        default:
            throw std::invalid_argument("cook material index must be 1 or 2");
    }
}

CookMaterial::CookMaterial(CookParameters parameters) : parameters_(parameters) {
    if (!(parameters.alpha > 0.0 && parameters.beta > 0.0 && parameters.kappa > 0.0)) {
        throw std::invalid_argument("cook material parameters must be positive");
    }
}

std::string CookMaterial::name() const {
    std::ostringstream os;
    os << "cook(" << parameters_.alpha << "," << parameters_.beta << "," << parameters_.kappa << ")";
    return os.str();
}

MaterialResponse<2> CookMaterial::evaluate(const Tensor2<2>& F, const Vec<2>& /*X*/) const {
    const auto [alpha, beta, kappa] = parameters_;
    const KinematicState<2> kin = kinematic_state<2>(F);
    const double J = kin.J;
    const double FF = F.squaredNorm();
    const double c_log = 2.0 * (alpha + 2.0 * beta);

    MaterialResponse<2> out;
    out.energy = alpha * (FF - 2.0) + beta * (FF + J * J - 3.0) + 0.5 * kappa * (J - 1.0) * (J - 1.0) -
                 c_log * std::log(J);

    // dW/dJ and d^2W/dJ^2
    const double g = 2.0 * beta * J + kappa * (J - 1.0) - c_log / J;
    const double dg = 2.0 * beta + kappa + c_log / (J * J);

    out.stress = 2.0 * (alpha + beta) * F + g * kin.H;

    Eigen::Matrix<double, 4, 1> h;
    h << kin.H(0, 0), kin.H(0, 1), kin.H(1, 0), kin.H(1, 1);
    out.tangent = 2.0 * (alpha + beta) * Tensor4<2>::Identity() + dg * h * h.transpose() +
                  g * jacobian_hessian<2>();
    return out;
}

MaterialResponse<2> evaluate_cook(const Tensor2<2>& F, int which) {
    return CookMaterial(which).evaluate(F, Vec<2>::Zero());
}

template <int Dim>
double fd_tangent_check(const MaterialModel<Dim>& model, const Tensor2<Dim>& F, const Vec<Dim>& X,
                        double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("finite-difference step must be positive");
    }
    const MaterialResponse<Dim> base = model.evaluate(F, X);
    auto deviation = [](double analytic, double numeric) {
        return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
    };

    double worst = 0.0;
    for (int k = 0; k < Dim; ++k) {
        for (int L = 0; L < Dim; ++L) {
            Tensor2<Dim> plus = F;
            Tensor2<Dim> minus = F;
            plus(k, L) += h;
            minus(k, L) -= h;
            const MaterialResponse<Dim> rp = model.evaluate(plus, X);
            const MaterialResponse<Dim> rm = model.evaluate(minus, X);

            const double dW = (rp.energy - rm.energy) / (2.0 * h);
            worst = std::max(worst, deviation(base.stress(k, L), dW));

            const Tensor2<Dim> dP = (rp.stress - rm.stress) / (2.0 * h);
            for (int i = 0; i < Dim; ++i) {
                for (int J = 0; J < Dim; ++J) {
                    const double analytic = base.tangent(flat_index<Dim>(i, J), flat_index<Dim>(k, L));
                    worst = std::max(worst, deviation(analytic, dP(i, J)));
                }
            }
        }
    }
    return worst;
}

template double fd_tangent_check<1>(const MaterialModel<1>&, const Tensor2<1>&, const Vec<1>&, double);
template double fd_tangent_check<2>(const MaterialModel<2>&, const Tensor2<2>&, const Vec<2>&, double);

}  // namespace fe2
