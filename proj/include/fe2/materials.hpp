#ifndef FE2_MATERIALS_HPP
#define FE2_MATERIALS_HPP

#include "fe2/kinematics.hpp"

#include <memory>
#include <string>

namespace fe2 {

template <int Dim>
struct MaterialResponse {
    double energy = 0.0;
    Tensor2<Dim> stress;   // first Piola-Kirchhoff, dW/dF
    Tensor4<Dim> tangent;  // d^2W/dFdF, row (iJ), column (kL)
};

/// Hyperelastic strain-energy density of the micro scale. Implementations
/// return energy, stress and tangent jointly; the position argument allows
/// for spatially varying parameters.
template <int Dim>
class MaterialModel {
public:
    virtual ~MaterialModel() = default;

    virtual MaterialResponse<Dim> evaluate(const Tensor2<Dim>& F, const Vec<Dim>& X) const = 0;
    virtual std::string name() const = 0;
    /// False for energies defined for every F (no ln J).
    virtual bool requires_positive_jacobian() const { return true; }
};

/// W(F, X) = lambda(X) (F^2 - 1), lambda(X) = 20 / cos(2 pi X / 3 - pi / 3).
/// The reference configuration is not stress free.
class Benchmark1DMaterial final : public MaterialModel<1> {
public:
    static double stiffness(double X);

    MaterialResponse<1> evaluate(const Tensor2<1>& F, const Vec<1>& X) const override;
    std::string name() const override { return "benchmark1d"; }
    bool requires_positive_jacobian() const override { return false; }
};

MaterialResponse<1> evaluate_benchmark_1d(double F, double X);

struct CookParameters {
    double alpha = 0.0;
    double beta = 0.0;
    double kappa = 0.0;
};

/// Parameters of the matrix (1) and cross-inclusion (2) phases in J/mm^2.
CookParameters cook_parameters(int which);

/// Compressible Mooney-Rivlin type energy in plane strain:
///   W = a (F:F - 2) + b (F:F + J^2 - 3) + k/2 (J - 1)^2 - 2 (a + 2b) ln J
class CookMaterial final : public MaterialModel<2> {
public:
    explicit CookMaterial(CookParameters parameters);
    explicit CookMaterial(int which) : CookMaterial(cook_parameters(which)) {}

    MaterialResponse<2> evaluate(const Tensor2<2>& F, const Vec<2>& X) const override;
    std::string name() const override;

    const CookParameters& parameters() const { return parameters_; }

private:
    CookParameters parameters_;
};

MaterialResponse<2> evaluate_cook(const Tensor2<2>& F, int which);

/// Worst relative deviation between analytic and central-difference stress
/// (from the energy) and tangent (from the stress). Deviations are measured
/// against max(1, |reference|) componentwise.
template <int Dim>
double fd_tangent_check(const MaterialModel<Dim>& model, const Tensor2<Dim>& F, const Vec<Dim>& X,
                        double h);

}  // namespace fe2

#endif
