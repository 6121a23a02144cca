#include "doctest.h"

#include "fe2/parallel.hpp"
#include "fe2/solver.hpp"
#include "support.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace fe2;
using namespace fe2::testing;

namespace {

const MacroBasisKind all_bases[] = {MacroBasisKind::Dirac, MacroBasisKind::Constant, MacroBasisKind::Linear,
                                    MacroBasisKind::Quadratic};
const MicroBc all_bcs[] = {MicroBc::Taylor, MicroBc::HomogeneousBoundary, MicroBc::Periodic};

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (b.size() == 0) return a.norm();
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

Increment oracle(const TwoScaleModel<2>& model, const TwoScaleState<2>& s, double load = 1.0) {
    return monolithic_direct_solve(assemble_tangent(model, s), assemble_residuals(model, s, load));
}

// P = tanh(F - 1)
class SofteningMaterial final : public MaterialModel<1> {
public:
    MaterialResponse<1> evaluate(const Tensor2<1>& F, const Vec<1>&) const override {
        const double t = std::tanh(F(0, 0) - 1.0);
        MaterialResponse<1> out;
        out.energy = std::log(std::cosh(F(0, 0) - 1.0));
        out.stress(0, 0) = t;
        out.tangent(0, 0) = 1.0 - t * t;
        return out;
    }
    std::string name() const override { return "softening"; }
    bool requires_positive_jacobian() const override { return false; }
};

}  // namespace

TEST_CASE("block elimination reproduces the monolithic solve") {
    std::mt19937_64 rng(21);
    int states = 0;
    for (MacroBasisKind basis : all_bases) {
        for (MicroBc bc : all_bcs) {
            for (int variant = 0; variant < 2; ++variant) {
                CAPTURE(to_string(basis));
                CAPTURE(to_string(bc));
                const int nx = basis == MacroBasisKind::Quadratic ? 1 + variant : 2 + 2 * variant;
                const int ny = 1 + variant;
                const TwoScaleModel<2> model(toy_problem_2d(basis, bc, nx, ny, 3 + variant));
                REQUIRE(model.macro_mesh().num_elements() <= 8);
                const TwoScaleState<2> s = perturbed_state(model, rng);
                const Increment ref = oracle(model, s, 0.7);
                const Increment inc = condensed_increment(model, s, 0.7, Strategy::NullSpace);
                CHECK(rel(inc.dq, ref.dq) < 1e-9);
                CHECK(rel(inc.dw, ref.dw) < 1e-9);
                ++states;
            }
        }
    }
    CHECK(states >= 20);
}

TEST_CASE("quadratic fluctuations need quadratic macro elements") {
    CHECK_THROWS_AS(TwoScaleModel<2>(toy_problem_2d(MacroBasisKind::Quadratic, MicroBc::Periodic, 2, 1, 3, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(TwoScaleModel<1>(toy_problem_1d(MacroBasisKind::Quadratic, MicroBc::HomogeneousBoundary)),
                    std::invalid_argument);
    CHECK_NOTHROW(TwoScaleModel<1>(toy_problem_1d(MacroBasisKind::Linear, MicroBc::HomogeneousBoundary)));
}

TEST_CASE("one-dimensional block elimination") {
    std::mt19937_64 rng(22);
    for (MacroBasisKind basis : all_bases) {
        const TwoScaleModel<1> model(toy_problem_1d(basis, MicroBc::HomogeneousBoundary, 3, 4, 2));
        const TwoScaleState<1> s = perturbed_state(model, rng, 0.05, 0.01);
        const Increment ref = monolithic_direct_solve(assemble_tangent(model, s), assemble_residuals(model, s));
        const Increment inc = condensed_increment(model, s, 1.0, Strategy::NullSpace);
        CHECK(rel(inc.dq, ref.dq) < 1e-9);
        CHECK(rel(inc.dw, ref.dw) < 1e-9);
    }
}

TEST_CASE("zero residuals give zero increments") {
    const TwoScaleModel<2> model(toy_problem_2d(MacroBasisKind::Linear, MicroBc::Periodic));
    std::mt19937_64 rng(23);
    const TwoScaleState<2> s = perturbed_state(model, rng);
    Residuals zero = assemble_residuals(model, s);
    zero.r_macro.setZero();
    zero.r_micro.setZero();
    const Increment inc = monolithic_direct_solve(assemble_tangent(model, s), zero);
    CHECK(inc.dq.norm() == 0.0);
    CHECK(inc.dw.norm() == 0.0);

    // stress-free reference without load
    TwoScaleProblem<2> p = toy_problem_2d(MacroBasisKind::Dirac, MicroBc::Periodic);
    p.tractions.clear();
    const TwoScaleModel<2> unloaded(p);
    for (Strategy st : {Strategy::Staggered, Strategy::NullSpace}) {
        const Increment i0 = condensed_increment(unloaded, unloaded.initial_state(), 1.0, st);
        CHECK(i0.dq.norm() < 1e-12);
        CHECK(i0.dw.norm() < 1e-12);
    }
}

TEST_CASE("with equilibrated RVEs the staggered increment matches the oracle") {
    for (MacroBasisKind basis : {MacroBasisKind::Dirac, MacroBasisKind::Constant}) {
        const TwoScaleModel<2> model(toy_problem_2d(basis, MicroBc::Periodic, 2, 2, 4));
        std::mt19937_64 rng(24);
        TwoScaleState<2> s = perturbed_state(model, rng, 0.05, 0.0);
        NewtonConfig equilibrate_only;
        equilibrate_only.eps_macro = 1e20;
        equilibrate_only.divergence_threshold = 1e30;
        const StepReport r = solve_step(model, s, 1.0, Strategy::Staggered, equilibrate_only);
        REQUIRE(r.status == SolveStatus::Converged);
        CHECK(r.num_iterations() == 0);
        CHECK(assemble_residuals(model, s).r_micro.norm() < 1e-11);

        const Increment ref = oracle(model, s);
        const Increment st = condensed_increment(model, s, 1.0, Strategy::Staggered);
        CHECK(rel(st.dq, ref.dq) < 1e-9);
        CHECK(rel(st.dw, ref.dw) < 1e-9);
    }
}

TEST_CASE("condensed tangent is symmetric") {
    std::mt19937_64 rng(25);
    for (MacroBasisKind basis : all_bases) {
        const TwoScaleModel<2> model(toy_problem_2d(basis, MicroBc::Periodic, 2, 2, 3));
        const Eigen::MatrixXd S = Eigen::MatrixXd(condensed_tangent(model, perturbed_state(model, rng)));
        CHECK((S - S.transpose()).norm() < 1e-10 * S.norm());
    }
}

TEST_CASE("condensed tangent equals the dense Schur complement") {
    std::mt19937_64 rng(26);
    const TwoScaleModel<2> model(toy_problem_2d(MacroBasisKind::Linear, MicroBc::HomogeneousBoundary));
    const TwoScaleState<2> s = perturbed_state(model, rng);
    const BlockTangent t = assemble_tangent(model, s);
    const Eigen::MatrixXd A = Eigen::MatrixXd(t.full());
    const int nm = t.macro_size();
    const int nw = t.micro_size();
    const Eigen::MatrixXd schur = A.topLeftCorner(nm, nm) -
                                  A.topRightCorner(nm, nw) * A.bottomRightCorner(nw, nw).lu().solve(A.bottomLeftCorner(nw, nm));
    const Eigen::MatrixXd S = Eigen::MatrixXd(condensed_tangent(model, s));
    CHECK((S - schur).norm() < 1e-10 * schur.norm());
}

TEST_CASE("quadratic one-dimensional problem converges in one iteration") {
    for (MacroBasisKind basis : all_bases) {
        CAPTURE(to_string(basis));
        const int order = basis == MacroBasisKind::Quadratic ? 2 : 1;
        const TwoScaleModel<1> model(toy_problem_1d(basis, MicroBc::HomogeneousBoundary, 4, 6, order));
        TwoScaleState<1> a = model.initial_state();
        TwoScaleState<1> b = model.initial_state();
        for (int n = 0; n < model.macro_mesh().num_nodes(); ++n) {
            a.q(n) = b.q(n) = 1.2 * model.macro_mesh().nodes[n](0);
        }
        NewtonConfig cfg;
        const SolveReport ra = solve_staggered(model, a, cfg);
        const SolveReport rb = solve_nullspace(model, b, cfg);
        REQUIRE(ra.converged());
        REQUIRE(rb.converged());
        CHECK(ra.steps[0].num_iterations() == 1);
        CHECK(rb.steps[0].num_iterations() == 1);
        CHECK((a.q - b.q).norm() < 1e-12 * b.q.norm());
        CHECK((a.w - b.w).norm() < 1e-12 * std::max(1.0, b.w.norm()));
    }
}

TEST_CASE("both strategies reach the same nonlinear equilibrium") {
    const TwoScaleModel<2> model(toy_problem_2d(MacroBasisKind::Dirac, MicroBc::Periodic, 2, 2, 4));
    NewtonConfig cfg;
    TwoScaleState<2> a = model.initial_state();
    TwoScaleState<2> b = model.initial_state();
    const SolveReport ra = run_load_schedule(model, a, LoadSchedule{2}, Strategy::Staggered, cfg);
    const SolveReport rb = run_load_schedule(model, b, LoadSchedule{2}, Strategy::NullSpace, cfg);
    REQUIRE(ra.converged());
    REQUIRE(rb.converged());
    CHECK((a.q - b.q).norm() < 1e-9 * b.q.norm());
    CHECK((a.w - b.w).norm() < 1e-7 * b.w.norm());
    const Residuals r = assemble_residuals(model, b);
    CHECK(r.r_macro.norm() < cfg.eps_macro);
    CHECK(r.r_micro.norm() < 1e-9);
    for (const SolveReport* rep : {&ra, &rb}) {
        for (const StepReport& s : rep->steps) {
            const DecayCheck d = quadratic_decay(s.residuals());
            CHECK(d.ok);
        }
    }
    // nonzero load actually deforms
    CHECK((b.q - model.initial_state().q).norm() > 1e-3);
}

TEST_CASE("divergence is reported, not thrown") {
    TwoScaleProblem<2> p = toy_problem_2d(MacroBasisKind::Dirac, MicroBc::Periodic);
    p.tractions[0].traction = Vec<2>(-500.0, 1000.0);
    const TwoScaleModel<2> model(p);
    for (Strategy st : {Strategy::Staggered, Strategy::NullSpace}) {
        TwoScaleState<2> s = model.initial_state();
        SolveReport rep;
        CHECK_NOTHROW(rep = run_load_schedule(model, s, LoadSchedule{1}, st, NewtonConfig{}));
        CHECK_FALSE(rep.converged());
        CHECK(rep.failed_step == 1);
        CHECK_FALSE(rep.failure.empty());
        CHECK(rep.steps.size() == 1);
    }

    // iteration limit
    const TwoScaleModel<2> mild(toy_problem_2d(MacroBasisKind::Dirac, MicroBc::Periodic));
    NewtonConfig one;
    one.max_iterations = 1;
    TwoScaleState<2> s = mild.initial_state();
    const StepReport r = solve_step(mild, s, 1.0, Strategy::NullSpace, one);
    CHECK(r.status == SolveStatus::Diverged);
    CHECK(r.failure.find("maximum") != std::string::npos);

    // residual bound
    NewtonConfig tight;
    tight.divergence_threshold = 1e-3;
    s = mild.initial_state();
    CHECK(solve_step(mild, s, 1.0, Strategy::NullSpace, tight).status == SolveStatus::Diverged);
}

TEST_CASE("schedule stops at the first diverged step") {
    // bar with a stress limit of 1, loaded to 1.8 in 4 steps
    TwoScaleProblem<1> p = toy_problem_1d(MacroBasisKind::Constant, MicroBc::HomogeneousBoundary);
    p.materials = {std::make_shared<SofteningMaterial>()};
    p.dirichlet.pop_back();
    p.body_load = Vec<1>::Zero();
    p.tractions.push_back({boundary_facets(p.macro_mesh, Side::XMax), Vec<1>(1.8)});
    const TwoScaleModel<1> model(p);
    TwoScaleState<1> s = model.initial_state();
    std::vector<int> seen;
    const SolveReport rep = run_load_schedule(model, s, LoadSchedule{4}, Strategy::NullSpace, NewtonConfig{},
                                              [&](const StepReport& r) { seen.push_back(r.step); });
    REQUIRE_FALSE(rep.converged());
    CHECK(rep.failed_step == 3);
    CHECK(rep.steps.size() == 3);
    CHECK(seen == std::vector<int>{1, 2, 3});
    CHECK(rep.steps[1].status == SolveStatus::Converged);
    CHECK(rep.steps[2].load_factor == 0.75);
    CHECK(rep.to_json()["failed_step"] == 3);
}

TEST_CASE("results do not depend on the thread count") {
    const TwoScaleModel<2> model(toy_problem_2d(MacroBasisKind::Constant, MicroBc::Periodic, 4, 2, 4));
    const int before = max_threads();
    auto run = [&](int threads) {
        set_threads(threads);
        TwoScaleState<2> s = model.initial_state();
        const SolveReport r = run_load_schedule(model, s, LoadSchedule{2}, Strategy::Staggered, NewtonConfig{});
        return std::make_pair(r, s);
    };
    const auto [r1, s1] = run(1);
    const auto [r4, s4] = run(4);
    set_threads(before);
    REQUIRE(r1.converged());
    CHECK(s1.q == s4.q);
    CHECK(s1.w == s4.w);
    REQUIRE(r1.steps.size() == r4.steps.size());
    for (std::size_t k = 0; k < r1.steps.size(); ++k) CHECK(r1.steps[k].residuals() == r4.steps[k].residuals());
}

TEST_CASE("quadratic decay check") {
    CHECK(quadratic_decay({1.0, 1e-1, 1e-3, 1e-6, 1e-12}).ok);
    const DecayCheck linear = quadratic_decay({1.0, 1e-1, 1e-2, 1e-3, 1e-4});
    CHECK_FALSE(linear.ok);
    CHECK(linear.worst_ratio == doctest::Approx(4.0 / 3.0));

    // pairs start once r_i < 1e-2 r_0 and r_i < 1
    const DecayCheck d = quadratic_decay({15.4, 11.7, 8.97e-3, 7.11e-7, 4.18e-10});
    CHECK(d.pairs == 2);
    CHECK(d.worst_ratio == doctest::Approx(std::log(4.18e-10) / std::log(7.11e-7)));
    CHECK_FALSE(d.ok);
    CHECK(quadratic_decay({15.4, 11.7, 8.97e-3, 7.11e-7, 4.18e-10}, 1.5).ok);

    CHECK(quadratic_decay({}).ok);
    CHECK(quadratic_decay({3.0}).pairs == 0);
    CHECK(quadratic_decay({100.0, 5.0, 0.5}).pairs == 0);
}

TEST_CASE("configuration validation and names") {
    NewtonConfig c;
    CHECK_NOTHROW(c.validate());
    c.eps_macro = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = NewtonConfig{};
    c.max_iterations = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = NewtonConfig{};
    c.divergence_threshold = 1e-12;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK_THROWS_AS(LoadSchedule{0}.validate(), std::invalid_argument);
    CHECK(LoadSchedule{4}.factor(3) == 0.75);

    CHECK(strategy_from_string("classical") == Strategy::Staggered);
    CHECK(strategy_from_string("generalized") == Strategy::NullSpace);
    CHECK(strategy_from_string(to_string(Strategy::NullSpace)) == Strategy::NullSpace);
    CHECK_THROWS_AS(strategy_from_string("monolithic"), std::invalid_argument);
}

TEST_CASE("reports serialize") {
    const TwoScaleModel<2> model(toy_problem_2d(MacroBasisKind::Dirac, MicroBc::Periodic));
    for (Strategy st : {Strategy::Staggered, Strategy::NullSpace}) {
        TwoScaleState<2> s = model.initial_state();
        const SolveReport rep = run_load_schedule(model, s, LoadSchedule{2}, st, NewtonConfig{});
        REQUIRE(rep.converged());
        const nlohmann::json j = rep.to_json();
        CHECK(j["strategy"] == to_string(st));
        CHECK(j["status"] == "converged");
        CHECK(j["load_steps"] == 2);
        CHECK(j["steps"].size() == 2);
        CHECK(j["steps"][1]["iterations"] == rep.steps[1].num_iterations());
        CHECK(j["steps"][0]["history"].size() == rep.steps[0].iterations.size());
        CHECK(nlohmann::json::parse(j.dump()) == j);

        const std::string csv = rep.to_csv();
        std::istringstream in(csv);
        std::string header;
        std::getline(in, header);
        CHECK(header == (st == Strategy::Staggered ? "step,iteration,macro_residual,micro_residual"
                                                   : "step,iteration,macro_residual"));
        int rows = 0;
        std::string line;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == static_cast<int>(rep.steps[0].iterations.size() + rep.steps[1].iterations.size()));
        // full precision round trip
        std::istringstream first(csv.substr(csv.find('\n') + 1));
        std::getline(first, line);
        const double value = std::stod(line.substr(line.rfind(',', st == Strategy::Staggered ? line.rfind(',') - 1
                                                                                              : std::string::npos) +
                                                   1));
        CHECK(value == rep.steps[0].iterations[0].macro_residual);
        CHECK(rep.max_iterations_per_step() >= 1);
    }
}
