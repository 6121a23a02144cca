#include "doctest.h"

#include "fe2/materials.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace fe2;

namespace {

Tensor2<2> random_gradient(std::mt19937_64& rng, double amp) {
    std::uniform_real_distribution<double> u(-amp, amp);
    Tensor2<2> F = Tensor2<2>::Identity();
    for (int c = 0; c < 4; ++c) F(c / 2, c % 2) += u(rng);
    return F;
}

}  // namespace

TEST_CASE("benchmark 1D material values") {
    const MaterialResponse<1> r = evaluate_benchmark_1d(1.0, 0.5);
    CHECK(r.energy == doctest::Approx(0.0));
    CHECK(r.stress(0, 0) == doctest::Approx(40.0).epsilon(1e-14));
    CHECK(r.tangent(0, 0) == doctest::Approx(40.0).epsilon(1e-14));

    CHECK(evaluate_benchmark_1d(0.0, 0.3).stress(0, 0) == 0.0);
    CHECK(Benchmark1DMaterial::stiffness(0.0) == doctest::Approx(40.0).epsilon(1e-14));
    CHECK(Benchmark1DMaterial::stiffness(1.0) == doctest::Approx(40.0).epsilon(1e-14));

    // residual stress in the reference configuration
    for (double X : {0.0, 0.25, 0.5, 0.9}) {
        const double lambda = 20.0 / std::cos(2.0 * std::numbers::pi * X / 3.0 - std::numbers::pi / 3.0);
        const MaterialResponse<1> ref = evaluate_benchmark_1d(1.0, X);
        CHECK(ref.energy == doctest::Approx(0.0));
        CHECK(ref.stress(0, 0) == doctest::Approx(2.0 * lambda).epsilon(1e-14));
        CHECK(evaluate_benchmark_1d(1.3, X).energy == doctest::Approx(lambda * (1.69 - 1.0)).epsilon(1e-14));
    }

    const Benchmark1DMaterial m;
    CHECK_FALSE(m.requires_positive_jacobian());
    CHECK(fd_tangent_check<1>(m, Tensor2<1>::Constant(1.3), Vec<1>(0.4), 1e-6) < 1e-6);
}

TEST_CASE("cook material is stress free in the reference configuration") {
    for (int which : {1, 2}) {
        const MaterialResponse<2> r = evaluate_cook(Tensor2<2>::Identity(), which);
        CHECK(r.energy == 0.0);
        CHECK(r.stress.cwiseAbs().maxCoeff() < 1e-13);
    }
    CHECK(CookMaterial(1).requires_positive_jacobian());
}

TEST_CASE("cook parameters") {
    const CookParameters p1 = cook_parameters(1);
    const CookParameters p2 = cook_parameters(2);
    CHECK(p1.alpha == 27.0);
    CHECK(p1.beta == 18.0);
    CHECK(p1.kappa == 60.0);
    CHECK(p2.alpha == 13.5);
    CHECK(p2.beta == 6.5);
    CHECK(p2.kappa == 30.0);
    CHECK_THROWS(cook_parameters(3));
}

TEST_CASE("cook material 2 at diag(2,1) by direct substitution") {
    Tensor2<2> F = Tensor2<2>::Zero();
    F(0, 0) = 2.0;
    F(1, 1) = 1.0;
    // F:F = 5, J = 2
    const double energy = 13.5 * 3.0 + 6.5 * 6.0 + 15.0 - 2.0 * 26.5 * std::log(2.0);
    const MaterialResponse<2> r = evaluate_cook(F, 2);
    CHECK(r.energy == doctest::Approx(energy).epsilon(1e-14));
    // P = 2(a+b) F + [2 b J + k (J-1) - 2 (a+2b)/J] H, H = diag(1,2)
    const double c = 2.0 * 6.5 * 2.0 + 30.0 - 2.0 * 26.5 / 2.0;
    CHECK(r.stress(0, 0) == doctest::Approx(40.0 * 2.0 + c).epsilon(1e-14));
    CHECK(r.stress(1, 1) == doctest::Approx(40.0 + 2.0 * c).epsilon(1e-14));
    CHECK(std::abs(r.stress(0, 1)) < 1e-14);
    CHECK(std::abs(r.stress(1, 0)) < 1e-14);
}

TEST_CASE("cook stress is the energy gradient and the tangent is symmetric") {
    std::mt19937_64 rng(1);
    for (int which : {1, 2}) {
        const CookMaterial m(which);
        for (int trial = 0; trial < 100; ++trial) {
            const Tensor2<2> F = random_gradient(rng, 0.1);
            CHECK(fd_tangent_check<2>(m, F, Vec<2>::Zero(), 1e-6) < 1e-5);
            const Tensor4<2> C = m.evaluate(F, Vec<2>::Zero()).tangent;
            CHECK((C - C.transpose()).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, C.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("larger deformations stay consistent") {
    std::mt19937_64 rng(2);
    const CookMaterial m(1);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor2<2> F = random_gradient(rng, 0.6);
        if (F.determinant() < 0.2) continue;
        ++checked;
        CHECK(fd_tangent_check<2>(m, F, Vec<2>::Zero(), 1e-6) < 1e-5);
    }
    CHECK(checked > 50);
}

TEST_CASE("cook material rejects inverted gradients") {
    Tensor2<2> F;
    F << 1, 0, 0, -1;
    CHECK_THROWS_AS(evaluate_cook(F, 1), NonPositiveJacobian);
    CHECK_THROWS_AS(fd_tangent_check<2>(CookMaterial(2), F, Vec<2>::Zero(), 1e-6), NonPositiveJacobian);
}
