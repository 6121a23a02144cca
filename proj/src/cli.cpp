#include "fe2/cli.hpp"

#include "fe2/assembly.hpp"
#include "fe2/mesh.hpp"
#include "fe2/parallel.hpp"

#include <CLI11.hpp>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace fe2::cli {

namespace fs = std::filesystem;

std::string to_string(StudyKind kind) {
    switch (kind) {
        case StudyKind::Benchmark1D: return "benchmark1d";
        case StudyKind::Cook: return "cook";
        case StudyKind::Custom: return "custom";
    }
    return "unknown";
}

StudyKind study_from_string(const std::string& name) {
    if (name == "benchmark1d" || name == "1d") return StudyKind::Benchmark1D;
    if (name == "cook") return StudyKind::Cook;
    if (name == "custom") return StudyKind::Custom;
    throw ConfigurationError("unknown study '" + name + "' (expected benchmark1d, cook or custom)");
}

namespace {

const std::vector<std::string> keys{
    "study.type",       "study.strategy",      "study.settings",     "study.k_range",   "study.load_steps",
    "study.basis",      "study.micro_bc",      "study.traction",     "mesh.macro",      "mesh.rve",
    "mesh.macro_order", "mesh.width",          "mesh.height",        "solver.eps_macro", "solver.eps_micro",
    "solver.max_iter",  "solver.max_micro_iter", "solver.micro_floor", "solver.divergence", "run.threads",
    "run.seed",         "run.out_dir"};

const std::set<std::string> benchmark_only{"study.settings", "study.k_range"};
const std::set<std::string> membrane_only{"study.load_steps", "study.basis", "study.traction", "mesh.macro",
                                          "mesh.rve"};
const std::set<std::string> custom_only{"mesh.macro_order", "mesh.width", "mesh.height"};

template <class T>
T number(const std::string& key, const std::string& text) {
    try {
        return boost::lexical_cast<T>(boost::trim_copy(text));
    } catch (const boost::bad_lexical_cast&) {
        throw ConfigurationError(key + ": cannot read '" + text + "' as a number");
    }
}

std::vector<std::string> split(const std::string& text, const char* separators) {
    std::vector<std::string> parts;
    boost::split(parts, text, boost::is_any_of(separators), boost::token_compress_on);
    std::vector<std::string> out;
    for (std::string& p : parts) {
        boost::trim(p);
        if (!p.empty()) out.push_back(p);
    }
    return out;
}

std::pair<int, int> grid(const std::string& key, const std::string& text) {
    const auto parts = split(boost::to_lower_copy(text), "x");
    if (parts.size() == 1) {
        const int n = number<int>(key, parts[0]);
        return {n, n};
    }
    if (parts.size() != 2) throw ConfigurationError(key + ": expected NxM, got '" + text + "'");
    return {number<int>(key, parts[0]), number<int>(key, parts[1])};
}

// "1,1 2,2" or "1,1;d,2": a setting itself contains a comma
std::vector<BasisSetting> parse_settings(const std::string& key, const std::string& text) {
    std::vector<BasisSetting> out;
    if (boost::trim_copy(text) == "all") return out;
    for (const std::string& item : split(text, " ;")) {
        try {
            out.push_back(BasisSetting::parse(item));
        } catch (const std::exception& e) {
            throw ConfigurationError(key + ": " + e.what());
        }
    }
    if (out.empty()) throw ConfigurationError(key + ": no basis setting given");
    return out;
}

void apply(RunConfig& c, const std::string& key, const std::string& value) {
    try {
        if (key == "study.type") {
            c.study = study_from_string(value);
        } else if (key == "study.strategy") {
            c.strategy = strategy_from_string(value);
        } else if (key == "study.settings") {
            c.settings = parse_settings(key, value);
        } else if (key == "study.k_range") {
            const auto dots = value.find("..");
            if (dots == std::string::npos) {
                c.k_min = c.k_max = number<int>(key, value);
            } else {
                c.k_min = number<int>(key, value.substr(0, dots));
                c.k_max = number<int>(key, value.substr(dots + 2));
            }
        } else if (key == "study.load_steps") {
            c.load_steps.clear();
            for (const std::string& s : split(value, ", ")) c.load_steps.push_back(number<int>(key, s));
        } else if (key == "study.basis") {
            c.basis = macro_basis_from_string(value);
        } else if (key == "study.micro_bc") {
            c.micro_bc = micro_bc_from_string(value);
        } else if (key == "study.traction") {
            const auto parts = split(value, ", ");
            if (parts.size() != 2) throw ConfigurationError(key + ": expected two components");
            c.traction = Vec<2>(number<double>(key, parts[0]), number<double>(key, parts[1]));
        } else if (key == "mesh.macro") {
            std::tie(c.macro_nx, c.macro_ny) = grid(key, value);
        } else if (key == "mesh.rve") {
            const auto [nx, ny] = grid(key, value);
            if (nx != ny) throw ConfigurationError(key + ": the RVE mesh must be square");
            c.rve_n = nx;
        } else if (key == "mesh.macro_order") {
            c.macro_order = number<int>(key, value);
        } else if (key == "mesh.width") {
            c.width = number<double>(key, value);
        } else if (key == "mesh.height") {
            c.height = number<double>(key, value);
        } else if (key == "solver.eps_macro") {
            c.newton.eps_macro = number<double>(key, value);
        } else if (key == "solver.eps_micro") {
            c.newton.eps_micro = number<double>(key, value);
        } else if (key == "solver.max_iter") {
            c.newton.max_iterations = number<int>(key, value);
        } else if (key == "solver.max_micro_iter") {
            c.newton.max_micro_iterations = number<int>(key, value);
        } else if (key == "solver.micro_floor") {
            c.newton.micro_floor = number<double>(key, value);
        } else if (key == "solver.divergence") {
            c.newton.divergence_threshold = number<double>(key, value);
        } else if (key == "run.threads") {
            c.threads = number<int>(key, value);
        } else if (key == "run.seed") {
            c.seed = number<std::uint64_t>(key, value);
        } else if (key == "run.out_dir") {
            c.out_dir = value;
        } else {
            throw ConfigurationError("unknown configuration key '" + key + "'");
        }
    } catch (const ConfigurationError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigurationError(key + ": " + e.what());
    }
}

}  // namespace

const std::vector<std::string>& known_keys() { return keys; }

void RunConfig::validate() const {
    try {
        newton.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigurationError(std::string("solver: ") + e.what());
    }
    if (threads < 0) throw ConfigurationError("run.threads must be >= 0");
    if (out_dir.empty()) throw ConfigurationError("run.out_dir is empty");
    if (study == StudyKind::Benchmark1D) {
        if (k_min < 1 || k_max < k_min) throw ConfigurationError("study.k_range must satisfy 1 <= k_min <= k_max");
        if (k_max > 14) throw ConfigurationError("study.k_range: k above 14 is not supported");
        if (micro_bc != MicroBc::HomogeneousBoundary) {
            throw ConfigurationError("study.micro_bc = " + fe2::to_string(micro_bc) +
                                     " conflicts with study.type = benchmark1d (homogeneous boundary only)");
        }
        return;
    }
    if (load_steps.empty()) throw ConfigurationError("study.load_steps is empty");
    for (int n : load_steps) {
        if (n < 1) throw ConfigurationError("study.load_steps: every n_l must be >= 1, got " + std::to_string(n));
    }
    if (macro_nx < 1 || macro_ny < 1) throw ConfigurationError("mesh.macro needs at least one element per side");
    if (rve_n < 3) throw ConfigurationError("mesh.rve needs at least 3 elements per side");
    if (study == StudyKind::Cook && micro_bc != MicroBc::Periodic) {
        throw ConfigurationError("study.micro_bc = " + fe2::to_string(micro_bc) +
                                 " conflicts with study.type = cook (periodic only)");
    }
    if (study == StudyKind::Custom) {
        if (macro_order < 1 || macro_order > 2) throw ConfigurationError("mesh.macro_order must be 1 or 2");
        if (!(width > 0) || !(height > 0)) throw ConfigurationError("mesh.width and mesh.height must be positive");
        if (basis == MacroBasisKind::Quadratic && macro_order < 2) {
            throw ConfigurationError("study.basis = quadratic conflicts with mesh.macro_order = 1");
        }
    } else if (basis == MacroBasisKind::Quadratic) {
        throw ConfigurationError("study.basis = quadratic conflicts with study.type = cook (bilinear elements)");
    }
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["study"] = to_string(study);
    j["strategy"] = fe2::to_string(strategy);
    if (study == StudyKind::Benchmark1D) {
        std::vector<std::string> labels;
        for (const BasisSetting& s : settings) labels.push_back(s.label());
        j["settings"] = labels;
        j["k_range"] = {k_min, k_max};
    } else {
        j["load_steps"] = load_steps;
        j["macro_mesh"] = {macro_nx, macro_ny};
        j["rve_mesh"] = {rve_n, rve_n};
        j["basis"] = fe2::to_string(basis);
        j["micro_bc"] = fe2::to_string(micro_bc);
        j["traction"] = {traction(0), traction(1)};
        if (study == StudyKind::Custom) {
            j["macro_order"] = macro_order;
            j["width"] = width;
            j["height"] = height;
        }
    }
    j["eps_macro"] = newton.eps_macro;
    j["eps_micro"] = newton.eps_micro;
    j["max_iter"] = newton.max_iterations;
    j["max_micro_iter"] = newton.max_micro_iterations;
    j["micro_floor"] = newton.micro_floor;
    j["divergence"] = newton.divergence_threshold;
    j["threads"] = threads;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    return j;
}

RunConfig parse_config(const std::string& path, const Overrides& overrides, const std::string& default_out_dir) {
    std::vector<std::pair<std::string, std::string>> entries;
    if (!path.empty()) {
        if (!fs::is_regular_file(path)) throw ConfigurationError("cannot read config file '" + path + "'");
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::ini_parser::read_ini(path, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigurationError("config file '" + path + "': " + e.message() + " (line " +
                                     std::to_string(e.line()) + ")");
        }
        for (const auto& [section, body] : tree) {
            if (body.empty()) throw ConfigurationError("config file '" + path + "': key '" + section + "' outside a section");
            for (const auto& [key, value] : body) entries.emplace_back(section + "." + key, value.data());
        }
    }
    entries.insert(entries.end(), overrides.begin(), overrides.end());

    RunConfig c;
    c.out_dir = default_out_dir;
    std::set<std::string> given;
    // the study type decides how the rest is read
    for (const auto& [key, value] : entries) {
        if (key == "study.type") c.study = study_from_string(value);
    }
    if (c.study == StudyKind::Benchmark1D) c.micro_bc = MicroBc::HomogeneousBoundary;
    for (const auto& [key, value] : entries) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigurationError("unknown configuration key '" + key + "'");
        }
        // a single setting also passes as a basis for the 1D study
        if (key == "study.basis" && c.study == StudyKind::Benchmark1D) {
            apply(c, "study.settings", value);
            given.insert("study.settings");
            continue;
        }
        apply(c, key, value);
        given.insert(key);
    }

    const std::string study = to_string(c.study);
    for (const std::string& key : given) {
        const bool wrong = (c.study != StudyKind::Benchmark1D && benchmark_only.count(key)) ||
                           (c.study == StudyKind::Benchmark1D && membrane_only.count(key)) ||
                           (c.study != StudyKind::Custom && custom_only.count(key));
        if (wrong) throw ConfigurationError(key + " conflicts with study.type = " + study);
    }
    c.validate();
    return c;
}

namespace {

std::string cell_tag(Strategy s, int n_l) { return "[" + fe2::to_string(s) + " n_l=" + std::to_string(n_l) + "]"; }

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

TwoScaleProblem<2> membrane_problem(const RunConfig& c) {
    CookSetup setup;
    setup.macro_nx = c.macro_nx;
    setup.macro_ny = c.macro_ny;
    setup.rve_n = c.rve_n;
    setup.basis = c.basis;
    setup.traction = c.traction;
    TwoScaleProblem<2> p = cook_problem(setup);
    if (c.study == StudyKind::Cook) return p;

    p.macro_mesh = build_box_mesh<2>(Vec<2>(0.0, 0.0), Vec<2>(c.width, c.height), {c.macro_nx, c.macro_ny},
                                     c.macro_order);
    p.micro_bc = c.micro_bc;
    p.dirichlet.clear();
    for (int node : boundary_nodes(p.macro_mesh, Side::XMin)) {
        for (int i = 0; i < 2; ++i) p.dirichlet.push_back({node, i, p.macro_mesh.nodes[node](i)});
    }
    p.tractions = {{boundary_facets(p.macro_mesh, Side::XMax), c.traction}};
    return p;
}

int run_benchmark(const RunConfig& c, std::ostream& log) {
    const AnalyticCheck check = verify_analytic_equilibrium();
    log << "analytic solution check: " << (check.passed() ? "passed" : "FAILED") << " " << check.to_json().dump()
        << std::endl;
    if (!check.passed()) throw std::logic_error("closed-form 1D solution failed its equilibrium check");

    std::vector<BasisSetting> settings = c.settings;
    if (settings.empty()) {
        for (const char* s : {"1,1", "2,2", "0,1", "0,2", "d,1", "d,2"}) settings.push_back(BasisSetting::parse(s));
    }
    bool all_converged = true;
    const auto reports = run_convergence_study(settings, c.k_min, c.k_max, c.newton, c.strategy,
                                               [&](const ErrorReport& r) {
                                                   char buf[256];
                                                   std::snprintf(buf, sizeof buf,
                                                                 "%s k=%d] h=%g iterations=%d err_phi=%.6e "
                                                                 "err_w=%.6e %s",
                                                                 r.setting.substr(0, r.setting.size() - 1).c_str(),
                                                                 r.k, r.h, r.iterations, r.err_phi, r.err_w,
                                                                 r.converged ? "" : r.failure.c_str());
                                                   log << buf << std::endl;
                                                   all_converged = all_converged && r.converged;
                                               });
    const fs::path dir(c.out_dir);
    write_file(dir / "convergence.csv", convergence_csv(reports));
    nlohmann::json summary = convergence_summary(reports, std::min(4, c.k_max - c.k_min + 1));
    summary["config"] = c.to_json();
    summary["analytic_check"] = check.to_json();
    write_file(dir / "convergence_summary.json", summary.dump(2) + "\n");

    for (const auto& [setting, fit] : summary["fitted_orders"].items()) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s fitted order err_phi %.3f err_w %.3f", setting.c_str(),
                      fit["err_phi"].get<double>(), fit["err_w"].get<double>());
        log << buf << std::endl;
    }
    return all_converged ? Success : Diverged;
}

int run_membrane(const RunConfig& c, std::ostream& log) {
    const TwoScaleModel<2> model(membrane_problem(c));
    log << "macro " << mesh_summary(model.macro_mesh()).dump() << " rve " << mesh_summary(model.rve_mesh()).dump()
        << " blocks " << model.num_blocks() << std::endl;
    const fs::path dir(c.out_dir);
    const int tip = cook_tip_node(model.macro_mesh());

    std::vector<CookCell> cells;
    nlohmann::json tips = nlohmann::json::array();
    for (int n_l : c.load_steps) {
        CookCell cell;
        cell.strategy = c.strategy;
        cell.load_steps = n_l;
        const std::string tag = cell_tag(c.strategy, n_l);
        TwoScaleState<2> state = model.initial_state();
        cell.report = run_load_schedule(model, state, LoadSchedule{n_l}, c.strategy, c.newton,
                                        [&](const StepReport& s) {
                                            char buf[256];
                                            std::snprintf(buf, sizeof buf, " step %d/%d: %d iterations, residual %.3e %s",
                                                          s.step, n_l, s.num_iterations(), s.final_residual(),
                                                          fe2::to_string(s.status).c_str());
                                            log << tag << buf;
                                            if (!s.failure.empty()) log << " (" << s.failure << ")";
                                            log << std::endl;
                                        });
        if (cell.report.converged()) {
            const std::string stem = fe2::to_string(c.strategy) + "_nl" + std::to_string(n_l);
            const NodalField macro = macro_von_mises(model, state);
            write_file(dir / ("von_mises_macro_" + stem + ".csv"), field_csv(macro));
            int worst = 0;
            double worst_value = -1.0;
            for (int k = 0; k < static_cast<int>(model.macro_points().size()); ++k) {
                const double vm = von_mises(cauchy_stress(average_stress(model, state, k),
                                                          macro_gradient(model, state.q, k)));
                if (vm > worst_value) {
                    worst_value = vm;
                    worst = k;
                }
            }
            write_file(dir / ("von_mises_rve_" + stem + ".csv"), field_csv(rve_von_mises(model, state, worst)));
            const Vec<2> u = state.q.segment<2>(2 * tip) - model.macro_mesh().nodes[tip];
            tips.push_back({{"n_l", n_l}, {"tip_displacement", {u(0), u(1)}}, {"rve_point", worst}});
        }
        cells.push_back(std::move(cell));
    }

    write_file(dir / "residuals.csv", cook_csv(cells));
    nlohmann::json summary = cook_summary(cells);
    summary["config"] = c.to_json();
    summary["tips"] = tips;
    write_file(dir / "summary.json", summary.dump(2) + "\n");

    log << "n_l  status     iterations per step" << std::endl;
    bool all = true;
    for (const CookCell& cell : cells) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%-4d %-10s", cell.load_steps, fe2::to_string(cell.report.status).c_str());
        log << buf;
        if (cell.report.converged()) {
            std::set<int> distinct;
            for (const StepReport& s : cell.report.steps) distinct.insert(s.num_iterations());
            for (int n : distinct) log << " " << n;
        } else {
            log << " / (step " << cell.report.failed_step << ": " << cell.report.failure << ")";
        }
        log << std::endl;
        all = all && cell.report.converged();
    }
    return all ? Success : Diverged;
}

TwoScaleProblem<2> check_problem(MacroBasisKind basis, MicroBc bc, int variant) {
    RunConfig c;
    c.study = StudyKind::Custom;
    c.basis = basis;
    c.micro_bc = bc;
    c.macro_order = basis == MacroBasisKind::Quadratic ? 2 : 1;
    c.macro_nx = basis == MacroBasisKind::Quadratic ? 1 : 2 + variant;
    c.macro_ny = 1;
    c.rve_n = 3 + variant;
    c.width = 2.0;
    c.height = 1.0;
    c.traction = Vec<2>(-0.5, 1.0);
    return membrane_problem(c);
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(1e-300, b.norm());
}

}  // namespace

int run(const RunConfig& c, std::ostream& log) {
    c.validate();
    std::error_code ec;
    fs::create_directories(c.out_dir, ec);
    if (!fs::is_directory(c.out_dir)) throw ConfigurationError("cannot create output directory '" + c.out_dir + "'");
    if (c.threads > 0) set_threads(c.threads);
    log << "config " << c.to_json().dump() << std::endl;
    write_file(fs::path(c.out_dir) / "config.json", c.to_json().dump(2) + "\n");
    return c.study == StudyKind::Benchmark1D ? run_benchmark(c, log) : run_membrane(c, log);
}

nlohmann::json CheckResult::to_json() const {
    return {{"states", states}, {"worst_oracle", worst_oracle}, {"worst_tangent", worst_tangent}, {"passed", passed}};
}

CheckResult self_check(std::uint64_t seed, int states) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const MacroBasisKind bases[] = {MacroBasisKind::Dirac, MacroBasisKind::Constant, MacroBasisKind::Linear,
                                    MacroBasisKind::Quadratic};
    const MicroBc bcs[] = {MicroBc::Taylor, MicroBc::HomogeneousBoundary, MicroBc::Periodic};
    CheckResult result;
    for (int i = 0; i < states; ++i) {
        const TwoScaleModel<2> model(check_problem(bases[i % 4], bcs[(i / 4) % 3], (i / 12) % 2));
        TwoScaleState<2> s = model.initial_state();
        for (int d = 0; d < model.num_macro_dofs(); ++d) {
            if (model.macro_free_index(d) >= 0) s.q(d) += 0.05 * u(rng);
        }
        for (Eigen::Index k = 0; k < s.w.size(); ++k) s.w(k) = 0.02 * u(rng);

        const BlockTangent t = assemble_tangent(model, s);
        const Residuals r = assemble_residuals(model, s);
        const Increment ref = monolithic_direct_solve(t, r);
        const Increment inc = condensed_increment(model, s, 1.0, Strategy::NullSpace);
        Eigen::VectorXd a(ref.dq.size() + ref.dw.size()), b(a.size());
        a << inc.dq, inc.dw;
        b << ref.dq, ref.dw;
        result.worst_oracle = std::max(result.worst_oracle, rel(a, b));

        // central differences on the full residual
        const int nm = model.num_free_macro();
        const int n = nm + model.total_micro_dofs();
        Eigen::MatrixXd fd(n, n);
        const double h = 1e-6;
        auto residual = [&](const TwoScaleState<2>& x) {
            const Residuals rr = assemble_residuals(model, x);
            Eigen::VectorXd v(n);
            v << rr.r_macro, rr.r_micro;
            return v;
        };
        for (int col = 0; col < n; ++col) {
            TwoScaleState<2> p = s, m = s;
            if (col < nm) {
                for (int d = 0; d < model.num_macro_dofs(); ++d) {
                    if (model.macro_free_index(d) == col) {
                        p.q(d) += h;
                        m.q(d) -= h;
                    }
                }
            } else {
                p.w(col - nm) += h;
                m.w(col - nm) -= h;
            }
            fd.col(col) = (residual(p) - residual(m)) / (2.0 * h);
        }
        result.worst_tangent = std::max(result.worst_tangent, rel(Eigen::MatrixXd(t.full()), fd));
        ++result.states;
    }
    result.passed = result.worst_oracle < 1e-9 && result.worst_tangent < 1e-5;
    return result;
}

void write_error_report(const std::string& out_dir, int code, const std::string& kind, const std::string& message) {
    try {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        std::ofstream out(fs::path(out_dir) / "error.json");
        if (out) out << nlohmann::json{{"exit_code", code}, {"kind", kind}, {"message", message}}.dump(2) << "\n";
    } catch (...) {
    }
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Two-scale FE2 solver with staggered and null-space Newton schemes"};
    app.require_subcommand(1);
    const char* env_dir = std::getenv("FE2_OUT_DIR");
    const std::string default_dir = env_dir && *env_dir ? env_dir : ".";

    CLI::App* run_cmd = app.add_subcommand("run", "run a study");
    std::string config_path;
    run_cmd->add_option("config", config_path, "INI configuration file");
    std::map<std::string, std::string> flags;
    auto flag = [&](const std::string& name, const std::string& key, const std::string& help) {
        run_cmd->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; },
                                                  help);
    };
    flag("--study", "study.type", "benchmark1d | cook | custom");
    flag("--strategy", "study.strategy", "staggered | nullspace");
    flag("--basis", "study.basis", "fluctuation basis (dirac, constant, linear, quadratic); 1D: setting list");
    flag("--setting", "study.settings", "1D basis settings, e.g. \"2,2\" or \"1,1;d,2\"");
    flag("--k-range,--k", "study.k_range", "1D refinement levels, e.g. 4..7");
    flag("--load-steps", "study.load_steps", "comma separated list of n_l");
    flag("--micro-bc", "study.micro_bc", "taylor | boundary | periodic");
    flag("--traction", "study.traction", "tx,ty");
    flag("--macro-mesh", "mesh.macro", "macro elements NxM");
    flag("--rve-mesh", "mesh.rve", "RVE elements NxN");
    flag("--eps-macro", "solver.eps_macro", "macro residual tolerance");
    flag("--eps-micro", "solver.eps_micro", "RVE residual tolerance (staggered)");
    flag("--max-iter", "solver.max_iter", "Newton iteration limit per load step");
    flag("--threads", "run.threads", "OpenMP threads");
    flag("--out-dir", "run.out_dir", "output directory (default $FE2_OUT_DIR or .)");
    flag("--seed", "run.seed", "random seed");

    CLI::App* check_cmd = app.add_subcommand("check", "randomized self check of the block elimination and tangent");
    std::uint64_t seed = 1;
    int states = 24;
    std::string check_dir = default_dir;
    check_cmd->add_option("--seed", seed, "random seed");
    check_cmd->add_option("--states", states, "number of random states")->check(CLI::PositiveNumber);
    check_cmd->add_option("--out-dir", check_dir, "output directory for error.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        std::string dir = default_dir;
        for (int i = 1; i < argc; ++i) {
            const std::string a = argv[i];
            if (a == "--out-dir" && i + 1 < argc) dir = argv[i + 1];
            if (a.rfind("--out-dir=", 0) == 0) dir = a.substr(10);
        }
        write_error_report(dir, ConfigError, "config", e.what());
        return ConfigError;
    }

    if (check_cmd->parsed()) {
        try {
            const CheckResult r = self_check(seed, states);
            out << r.to_json().dump() << std::endl;
            if (!r.passed) {
                write_error_report(check_dir, InternalError, "check", r.to_json().dump());
                return InternalError;
            }
            return Success;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << std::endl;
            write_error_report(check_dir, InternalError, "internal", e.what());
            return InternalError;
        }
    }

    Overrides overrides(flags.begin(), flags.end());
    RunConfig config;
    try {
        config = parse_config(config_path, overrides, default_dir);
    } catch (const ConfigurationError& e) {
        err << "configuration error: " << e.what() << std::endl;
        const auto dir = flags.count("run.out_dir") ? flags["run.out_dir"] : default_dir;
        write_error_report(dir, ConfigError, "config", e.what());
        return ConfigError;
    }
    try {
        const int code = run(config, out);
        if (code == Diverged) {
            err << "solver diverged, see " << (fs::path(config.out_dir) / "error.json").string() << std::endl;
            write_error_report(config.out_dir, Diverged, "diverged", "at least one solve diverged");
        }
        return code;
    } catch (const ConfigurationError& e) {
        err << "configuration error: " << e.what() << std::endl;
        write_error_report(config.out_dir, ConfigError, "config", e.what());
        return ConfigError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << std::endl;
        write_error_report(config.out_dir, InternalError, "internal", e.what());
        return InternalError;
    }
}

}  // namespace fe2::cli
