// Acceptance run: one PASS/FAIL line per criterion.
// FE2_FULL_COOK=1 runs the Cook study at 20x20 / 30x30 instead of the smoke size.
// FE2_ACCEPTANCE_STRICT=1 turns any FAIL into a nonzero exit status.

#include "fe2/assembly.hpp"
#include "fe2/cli.hpp"
#include "fe2/studies.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

using namespace fe2;

namespace {

struct Outcome {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    nlohmann::json data;
};

std::vector<Outcome> outcomes;

void report(Outcome o) {
    std::printf("criterion %d: %s %s; %s\n", o.id, o.pass ? "PASS" : "FAIL", o.name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    outcomes.push_back(std::move(o));
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

bool env_flag(const char* name) {
    const char* v = std::getenv(name);
    return v && std::string(v) == "1";
}

class HomogeneousBar final : public MaterialModel<1> {
public:
    MaterialResponse<1> evaluate(const Tensor2<1>& F, const Vec<1>&) const override {
        const double f = F(0, 0);
        MaterialResponse<1> out;
        out.energy = 20.0 * (f * f - 1.0);
        out.stress(0, 0) = 40.0 * f;
        out.tangent(0, 0) = 40.0;
        return out;
    }
    std::string name() const override { return "homogeneous"; }
    bool requires_positive_jacobian() const override { return false; }
};

// worst pointwise gap over the equilibrated points, count of points off equilibrium
std::pair<double, int> hill_mandel_gaps(const TwoScaleModel<1>& model, const TwoScaleState<1>& state) {
    double worst = 0.0;
    int off = 0;
    for (int k = 0; k < static_cast<int>(model.macro_points().size()); ++k) {
        const HillMandelReport r = hill_mandel_check(model, state, k);
        if (r.at_equilibrium) {
            worst = std::max(worst, r.gap);
        } else {
            ++off;
        }
    }
    return {worst, off};
}

void criterion8(bool& analytic_ok) {
    const AnalyticCheck c = verify_analytic_equilibrium(1e-12);
    analytic_ok = c.passed();
    const nlohmann::json j = c.to_json();
    report({8, "closed-form 1D solution", c.passed(),
            "compliance " + fmt("%.1e", c.compliance) + ", curvature " + fmt("%.1e", c.curvature) + ", ODE " +
                fmt("%.1e", c.homogenized_ode) + ", micro equilibrium " + fmt("%.1e", c.micro_equilibrium) +
                ", boundary " + fmt("%.1e", c.boundary) + " (tolerance 1e-12)",
            j});
}

void criteria12() {
    const cli::CheckResult r = cli::self_check(20240901, 24);
    report({1, "block elimination against monolithic solve", r.worst_oracle < 1e-9,
            std::to_string(r.states) + " random states, worst relative difference " + fmt("%.2e", r.worst_oracle) +
                " (limit 1e-9)",
            r.to_json()});
    report({2, "tangent against finite differences", r.worst_tangent < 1e-5,
            "4 bases x 3 micro conditions, worst relative difference " + fmt("%.2e", r.worst_tangent) +
                " (limit 1e-5)",
            r.to_json()});
}

void criteria34() {
    std::vector<BasisSetting> settings;
    for (const char* s : {"1,1", "2,2", "0,1", "0,2", "d,1", "d,2"}) settings.push_back(BasisSetting::parse(s));
    const auto reports = run_convergence_study(settings, 4, 7, NewtonConfig{}, Strategy::NullSpace);
    const nlohmann::json summary = convergence_summary(reports);
    std::ofstream("acceptance_convergence.csv") << convergence_csv(reports);

    bool orders_ok = true;
    bool converged = true;
    std::string failures;
    for (const ErrorReport& r : reports) converged = converged && r.converged;
    for (const auto& c : summary["checks"]) {
        if (c["quantity"] != "err_phi" && c["quantity"] != "err_w") continue;
        if (c["pass"].get<bool>()) continue;
        orders_ok = false;
        std::string band = fmt(">= %.2f", c["lower"].get<double>());
        if (c.contains("upper")) band = fmt("[%.2f, ", c["lower"].get<double>()) + fmt("%.2f]", c["upper"].get<double>());
        failures += " " + c["setting"].get<std::string>() + " " + c["quantity"].get<std::string>() + " " +
                    fmt("%.3f", c["order"].get<double>()) + " not in " + band + ";";
    }
    std::string fitted;
    for (const auto& [setting, fit] : summary["fitted_orders"].items()) {
        fitted += " " + setting + " " + fmt("%.3f", fit["err_phi"].get<double>()) + "/" +
                  fmt("%.3f", fit["err_w"].get<double>());
    }
    report({3, "1D convergence orders k = 4..7", orders_ok && converged,
            "fitted err_phi/err_w:" + fitted + (failures.empty() ? "" : "; out of band:" + failures), summary});

    for (const auto& c : summary["checks"]) {
        if (c["quantity"] != "err_w overlap") continue;
        const double spread = c["spread"].get<double>();
        std::string per_k;
        for (int k = 4; k <= 7; ++k) {
            std::vector<double> vals;
            for (const ErrorReport& r : reports) {
                if (r.k == k && (r.setting == "[0,1]" || r.setting == "[0,2]" || r.setting == "[d,1]")) {
                    vals.push_back(r.err_w);
                }
            }
            const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
            per_k += fmt(" k=%.0f ", k) + fmt("%.2f%%", 100.0 * (*hi - *lo) / *lo);
        }
        report({4, "err_w overlap of [0,1], [0,2], [d,1]", c["pass"].get<bool>(),
                "largest spread " + fmt("%.2f%%", 100.0 * spread) + " (limit 5%), per level:" + per_k, c});
    }
}

void criterion7() {
    double worst = 0.0;
    int off = 0;
    std::string per;
    for (const char* text : {"1,1", "2,2", "0,1", "0,2", "d,1", "d,2"}) {
        const BasisSetting setting = BasisSetting::parse(text);
        TwoScaleState<1> state;
        const ErrorReport r = run_benchmark1d_cell(setting, 4, NewtonConfig{}, Strategy::NullSpace, &state);
        if (!r.converged) {
            per += " " + setting.label() + " did not converge;";
            worst = INFINITY;
            continue;
        }
        const TwoScaleModel<1> model(benchmark1d_problem(setting, 4));
        const auto [g, n_off] = hill_mandel_gaps(model, state);
        worst = std::max(worst, g);
        off += n_off;
        per += " " + setting.label() + " " + fmt("%.1e", g);
        if (n_off) per += " (" + std::to_string(n_off) + " points off equilibrium)";
    }

    // same problem with constant stiffness
    double homogeneous = 0.0;
    for (const char* text : {"1,1", "d,2"}) {
        const BasisSetting setting = BasisSetting::parse(text);
        TwoScaleProblem<1> p = benchmark1d_problem(setting, 4);
        p.materials = {std::make_shared<HomogeneousBar>()};
        const TwoScaleModel<1> model(p);
        TwoScaleState<1> state = model.initial_state();
        const double right = p.dirichlet.back().value;
        for (int n = 0; n < model.macro_mesh().num_nodes(); ++n) {
            state.q(n) = model.macro_mesh().nodes[n](0) * right / bench1d::macro_length;
        }
        const StepReport s = solve_step(model, state, 1.0, Strategy::NullSpace, NewtonConfig{});
        if (s.status != SolveStatus::Converged) {
            homogeneous = INFINITY;
            continue;
        }
        homogeneous = std::max(homogeneous, hill_mandel_gaps(model, state).first);
    }
    const bool pass = worst < 1e-10 && homogeneous < 1e-12;
    report({7, "Hill-Mandel at converged 1D points", pass,
            "worst gap over equilibrated points " + fmt("%.2e", worst) + " (limit 1e-10):" + per +
                "; homogeneous " + fmt("%.2e", homogeneous) + " (limit 1e-12)",
            {{"worst", worst}, {"homogeneous", homogeneous}, {"points_off_equilibrium", off}}});
}

// reference macro residuals, n_l = 22
const std::vector<double> ref_generalized_first{15.4, 38.4, 1.92e-2, 1.06e-7, 4.61e-10};
const std::vector<double> ref_classical_first{15.4, 38.4, 1.52e-2, 7.61e-7, 3.73e-10};
const std::vector<double> ref_generalized_last{15.4, 11.7, 8.97e-3, 7.11e-7, 4.18e-10};
const std::vector<double> ref_classical_last{15.4, 11.7, 8.16e-3, 5.24e-7, 6.00e-10};

double worst_decades(const std::vector<double>& ours, const std::vector<double>& table) {
    double worst = 0.0;
    for (std::size_t i = 0; i < std::min(ours.size(), table.size()); ++i) {
        worst = std::max(worst, std::abs(std::log10(ours[i] / table[i])));
    }
    return worst;
}

void criteria56() {
    const bool full = env_flag("FE2_FULL_COOK");
    CookSetup setup;
    if (!full) {
        setup.macro_nx = setup.macro_ny = 10;
        setup.rve_n = 14;
    }
    const std::vector<int> steps{2, 12, 22, 32, 42};
    const auto t0 = std::chrono::steady_clock::now();
    const auto cells = run_cook_study(setup, steps, {Strategy::NullSpace, Strategy::Staggered}, NewtonConfig{},
                                      [](const CookCell& c, const StepReport& s) {
                                          if (s.status == SolveStatus::Diverged || s.step == 1 ||
                                              s.step == c.load_steps) {
                                              std::printf("  [%s n_l=%d] step %d: %d iterations, %s\n",
                                                          to_string(c.strategy).c_str(), c.load_steps, s.step,
                                                          s.num_iterations(), to_string(s.status).c_str());
                                              std::fflush(stdout);
                                          }
                                      });
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream("acceptance_cook.csv") << cook_csv(cells);

    auto within = [](const CookCell& c, int target) {
        if (!c.report.converged()) return false;
        for (const StepReport& s : c.report.steps) {
            if (std::abs(s.num_iterations() - target) > 1) return false;
        }
        return true;
    };
    auto row = [](const CookCell& c) {
        if (!c.report.converged()) return std::string("/");
        int lo = 1000, hi = 0;
        for (const StepReport& s : c.report.steps) {
            lo = std::min(lo, s.num_iterations());
            hi = std::max(hi, s.num_iterations());
        }
        return lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
    };

    bool table_ok = true;
    std::string generalized = "generalized", classical = "classical";
    for (const CookCell& c : cells) {
        const bool nullspace = c.strategy == Strategy::NullSpace;
        (nullspace ? generalized : classical) += " " + row(c);
        if (nullspace) {
            table_ok = table_ok && within(c, c.load_steps == 2 ? 6 : 4);
        } else if (c.load_steps <= 12) {
            table_ok = table_ok && !c.report.converged();
        } else {
            table_ok = table_ok && within(c, 4);
        }
    }
    const bool in_time = full || seconds < 120.0;
    report({5, std::string("Cook robustness table (") + (full ? "20x20/30x30" : "smoke 10x10/14x14") + ")",
            table_ok && in_time,
            "n_l 2/12/22/32/42: " + generalized + "; " + classical + "; expected generalized 6 4 4 4 4, classical / / 4 4 4; " +
                fmt("%.0f s", seconds) + (full ? "" : " (limit 120 s)"),
            cook_summary(cells)});

    // decay and magnitudes
    bool decay_ok = true;
    int pairs = 0;
    double worst_ratio = INFINITY;
    std::string offenders;
    double decades = 0.0;
    std::string magnitudes;
    for (const CookCell& c : cells) {
        for (const StepReport& s : c.report.steps) {
            if (s.status != SolveStatus::Converged) continue;
            const DecayCheck d = quadratic_decay(s.residuals());
            pairs += d.pairs;
            if (d.pairs) worst_ratio = std::min(worst_ratio, d.worst_ratio);
            if (!d.ok) {
                decay_ok = false;
                if (offenders.size() < 200) {
                    offenders += " " + to_string(c.strategy) + " n_l=" + std::to_string(c.load_steps) +
                                 " step " + std::to_string(s.step) + fmt(" (%.2f),", d.worst_ratio);
                }
            }
        }
        if (c.load_steps == 22 && c.report.converged()) {
            const bool ns = c.strategy == Strategy::NullSpace;
            const double a = worst_decades(c.report.steps.front().residuals(),
                                           ns ? ref_generalized_first : ref_classical_first);
            const double b = worst_decades(c.report.steps.back().residuals(),
                                           ns ? ref_generalized_last : ref_classical_last);
            decades = std::max({decades, a, b});
            magnitudes += " " + to_string(c.strategy) + fmt(" r0 %.3g", c.report.steps.front().residuals()[0]) +
                          fmt(" (reference 15.4), worst %.2f decades;", std::max(a, b));
        }
    }
    const bool have_table = !magnitudes.empty();
    report({6, "quadratic decay and reference residual magnitudes", decay_ok && have_table && decades <= 2.0,
            std::to_string(pairs) + " residual pairs, smallest log ratio " + fmt("%.2f", worst_ratio) +
                " (limit 1.70)" + (offenders.empty() ? "" : "; failing:" + offenders) + "; n_l = 22:" +
                (have_table ? magnitudes : " no converged run"),
            {{"pairs", pairs}, {"worst_ratio", worst_ratio}, {"decades", decades}}});
}

}  // namespace

int main() {
    std::printf("acceptance run%s\n", env_flag("FE2_FULL_COOK") ? " (full Cook)" : "");
    bool analytic_ok = false;
    criterion8(analytic_ok);
    if (!analytic_ok) {
        std::printf("closed-form oracle failed; solver criteria not run\n");
        for (int id = 1; id <= 7; ++id) report({id, "not run", false, "closed-form oracle failed", {}});
    } else {
        criteria12();
        criteria34();
        criterion7();
        criteria56();
    }

    int passed = 0;
    nlohmann::json all = nlohmann::json::array();
    for (const Outcome& o : outcomes) {
        passed += o.pass;
        all.push_back({{"criterion", o.id}, {"name", o.name}, {"pass", o.pass}, {"detail", o.detail}, {"data", o.data}});
    }
    std::ofstream("acceptance_report.json") << all.dump(2) << "\n";
    std::printf("acceptance summary: %d of %zu criteria passed\n", passed, outcomes.size());
    if (env_flag("FE2_ACCEPTANCE_STRICT") && passed != static_cast<int>(outcomes.size())) return 1;
    return 0;
}
