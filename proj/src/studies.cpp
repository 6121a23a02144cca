#include "fe2/studies.hpp"

#include "fe2/assembly.hpp"
#include "fe2/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace fe2 {

namespace bench1d {

namespace {
constexpr double pi = std::numbers::pi;
constexpr double sqrt3 = std::numbers::sqrt3;
constexpr double curvature = -3.0 * sqrt3 / (80.0 * pi);
constexpr double slope0 = 3003.0 * sqrt3 / (80.0 * pi);
}  // namespace

double lambda(double Xt) { return Benchmark1DMaterial::stiffness(Xt); }
double lambda_eff() { return 40.0 * pi / (3.0 * sqrt3); }
double phi(double X) { return 0.5 * curvature * X * X + slope0 * X; }
double F(double X) { return curvature * X + slope0; }
double phi_curvature() { return curvature; }
double w(double X, double Xt) {
    return F(X) * (std::sin(2.0 * pi * Xt / 3.0 - pi / 3.0) / sqrt3 - Xt + 0.5);
}
double dw(double X, double Xt) {
    return F(X) * (2.0 * pi / (3.0 * sqrt3) * std::cos(2.0 * pi * Xt / 3.0 - pi / 3.0) - 1.0);
}
double phi_right() { return 37575.0 * sqrt3 / (2.0 * pi); }

}  // namespace bench1d

AnalyticSolution1D analytic_solution_1d(double X, double Xt) {
    if (!(X >= 0.0 && X <= bench1d::macro_length) || !(Xt >= 0.0 && Xt <= bench1d::micro_length)) {
        throw std::out_of_range("analytic solution evaluated outside (0,1000) x (0,1)");
    }
    return {bench1d::phi(X), bench1d::w(X, Xt), bench1d::F(X)};
}

bool AnalyticCheck::passed() const {
    return compliance <= tolerance && curvature <= tolerance && homogenized_ode <= tolerance &&
           micro_equilibrium <= tolerance && boundary <= tolerance;
}

nlohmann::json AnalyticCheck::to_json() const {
    return {{"compliance", compliance},         {"curvature", curvature},
            {"homogenized_ode", homogenized_ode}, {"micro_equilibrium", micro_equilibrium},
            {"boundary", boundary},             {"tolerance", tolerance},
            {"passed", passed()}};
}

AnalyticCheck verify_analytic_equilibrium(double tolerance) {
    using std::numbers::pi;
    using std::numbers::sqrt3;
    AnalyticCheck c;
    c.tolerance = tolerance;

    // compliance: closed-form antiderivative and a 16-point Gauss rule
    const double expected = 3.0 * sqrt3 / (40.0 * pi);
    auto antiderivative = [](double x) { return 3.0 / (40.0 * pi) * std::sin(2.0 * pi * x / 3.0 - pi / 3.0); };
    const double closed = antiderivative(1.0) - antiderivative(0.0);
    const QuadratureRule<1> rule = gauss_rule<1>(16);
    double quad = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const double x = 0.5 * (rule.points[q](0) + 1.0);
        quad += 0.5 * rule.weights[q] / bench1d::lambda(x);
    }
    c.compliance = std::max(std::abs(closed - expected), std::abs(quad - expected)) / expected;
    c.compliance = std::max(c.compliance, std::abs(1.0 / expected - bench1d::lambda_eff()) / bench1d::lambda_eff());

    // phi'' from central differences of F (exact for the linear F)
    const double hF = 100.0;
    double curv = 0.0;
    double ode = 0.0;
    for (int i = 1; i < 10; ++i) {
        const double X = 100.0 * i;
        const double second = (bench1d::F(X + hF / 2) - bench1d::F(X - hF / 2)) / hF;
        curv = std::max(curv, std::abs(second + 3.0 * sqrt3 / (80.0 * pi)) / (3.0 * sqrt3 / (80.0 * pi)));
        ode = std::max(ode, std::abs(bench1d::lambda_eff() * second + 0.5) / 0.5);
        // derivative of phi against F
        const double dphi = (bench1d::phi(X + 1.0) - bench1d::phi(X - 1.0)) / 2.0;
        curv = std::max(curv, std::abs(dphi - bench1d::F(X)) / bench1d::F(X));
    }
    c.curvature = curv;
    c.homogenized_ode = ode;

    // lambda(X~) (F + dw/dX~) must not depend on X~
    double eq = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double X = bench1d::macro_length * (i + 0.5) / 100.0;
        const double flux = bench1d::lambda_eff() * bench1d::F(X);
        for (int j = 0; j < 100; ++j) {
            const double Xt = (j + 0.5) / 100.0;
            const double local = bench1d::lambda(Xt) * (bench1d::F(X) + bench1d::dw(X, Xt));
            eq = std::max(eq, std::abs(local - flux) / std::abs(flux));
        }
    }
    c.micro_equilibrium = eq;

    double bnd = std::abs(bench1d::phi(0.0));
    bnd = std::max(bnd, std::abs(bench1d::phi(1000.0) - bench1d::phi_right()) / bench1d::phi_right());
    for (int i = 0; i <= 10; ++i) {
        const double X = 100.0 * i;
        bnd = std::max(bnd, std::abs(bench1d::w(X, 0.0)) / bench1d::F(X));
        bnd = std::max(bnd, std::abs(bench1d::w(X, 1.0)) / bench1d::F(X));
    }
    c.boundary = bnd;
    return c;
}

BasisSetting BasisSetting::parse(const std::string& text) {
    std::string s;
    for (char ch : text) {
        if (ch != '[' && ch != ']' && ch != ' ') s += ch;
    }
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("basis setting '" + text + "' needs the form a,p");
    const std::string a = s.substr(0, comma);
    const std::string p = s.substr(comma + 1);
    BasisSetting out;
    out.basis = macro_basis_from_string(a == "\xce\xb4" ? "d" : a);
    if (p != "1" && p != "2") throw std::invalid_argument("element order in '" + text + "' must be 1 or 2");
    out.order = std::stoi(p);
    if (out.basis != MacroBasisKind::Dirac && out.basis != MacroBasisKind::Constant &&
        macro_basis_order(out.basis) != out.order) {
        throw std::invalid_argument("setting '" + text + "': polynomial fluctuation order must match the elements");
    }
    return out;
}

std::string BasisSetting::label() const {
    const std::string a = basis == MacroBasisKind::Dirac ? "d" : std::to_string(macro_basis_order(basis));
    return "[" + a + "," + std::to_string(order) + "]";
}

TwoScaleProblem<1> benchmark1d_problem(const BasisSetting& setting, int k) {
    if (k < 0 || k > 14) throw std::invalid_argument("refinement exponent out of range");
    const int n = 1 << k;
    TwoScaleProblem<1> p;
    p.macro_mesh = build_interval_mesh(bench1d::macro_length, n, setting.order);
    p.rve_mesh = build_interval_mesh(bench1d::micro_length, n, setting.order);
    p.materials = {std::make_shared<Benchmark1DMaterial>()};
    p.rve_material.assign(p.rve_mesh.num_elements(), 0);
    p.basis = setting.basis;
    p.micro_bc = MicroBc::HomogeneousBoundary;
    p.body_load = Vec<1>(bench1d::body_load);
    p.dirichlet.push_back({0, 0, 0.0});
    p.dirichlet.push_back({p.macro_mesh.num_nodes() - 1, 0, bench1d::phi_right()});
    return p;
}

namespace {

// Lagrange polynomials through arbitrary 1D nodes.
Eigen::VectorXd lagrange_through(const std::vector<double>& nodes, double x) {
    const int n = static_cast<int>(nodes.size());
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (a != b) v(a) *= (x - nodes[b]) / (nodes[a] - nodes[b]);
    return v;
}

}  // namespace

Eigen::VectorXd fluctuation_at(const TwoScaleModel<1>& model, const TwoScaleState<1>& state, int element,
                               double xi) {
    const int mf = model.micro_free_dofs();
    const int ppe = model.points_per_element();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mf);
    if (model.basis() == MacroBasisKind::Dirac) {
        const int order = model.problem().macro_quadrature > 0 ? model.problem().macro_quadrature
                                                                : model.macro_mesh().order + 1;
        const QuadratureRule<1> rule = gauss_rule<1>(order);
        std::vector<double> nodes;
        for (const auto& p : rule.points) nodes.push_back(p(0));
        const Eigen::VectorXd L = lagrange_through(nodes, xi);
        for (int q = 0; q < ppe; ++q) {
            out += L(q) * state.w.segment(model.block_offset(element * ppe + q), mf);
        }
        return out;
    }
    const Eigen::VectorXd R = model.basis_at(Vec<1>(xi));
    for (int b = 0; b < model.num_basis(); ++b) {
        out += R(b) * state.w.segment(model.block_offset(element) + b * mf, mf);
    }
    return out;
}

FieldErrors benchmark1d_errors(const TwoScaleModel<1>& model, const TwoScaleState<1>& state) {
    const Mesh<1>& macro = model.macro_mesh();
    const Mesh<1>& rve = model.rve_mesh();
    const QuadratureRule<1> mrule = gauss_rule<1>(macro.order + 3);
    const QuadratureRule<1> rrule = gauss_rule<1>(rve.order + 3);

    // RVE shape data is the same for every macro point
    struct MicroSample {
        std::vector<int> nodes;
        Eigen::VectorXd N;
        double Xt;
        double weight;
    };
    std::vector<MicroSample> micro;
    for (int e = 0; e < rve.num_elements(); ++e) {
        const auto nodes = rve.element(e);
        for (std::size_t l = 0; l < rrule.size(); ++l) {
            const ShapeValues<1> sv = shape_values(rve, e, rrule.points[l]);
            micro.push_back({std::vector<int>(nodes.begin(), nodes.end()), sv.values, sv.point(0),
                             rrule.weights[l] * sv.det_jacobian});
        }
    }

    double phi_err = 0.0, phi_ref = 0.0, w_err = 0.0, w_ref = 0.0;
    for (int e = 0; e < macro.num_elements(); ++e) {
        const auto nodes = macro.element(e);
        for (std::size_t q = 0; q < mrule.size(); ++q) {
            const ShapeValues<1> sv = shape_values(macro, e, mrule.points[q]);
            const double X = sv.point(0);
            const double W = mrule.weights[q] * sv.det_jacobian;
            double phi_h = 0.0;
            for (std::size_t a = 0; a < nodes.size(); ++a) phi_h += sv.values(a) * state.q(nodes[a]);
            const double phi_a = bench1d::phi(X);
            phi_err += W * (phi_h - phi_a) * (phi_h - phi_a);
            phi_ref += W * phi_a * phi_a;

            const Eigen::VectorXd nodal = expand_fluctuation(model, fluctuation_at(model, state, e, mrule.points[q](0)));
            for (const MicroSample& m : micro) {
                double wh = 0.0;
                for (std::size_t c = 0; c < m.nodes.size(); ++c) wh += m.N(c) * nodal(m.nodes[c]);
                const double wa = bench1d::w(X, m.Xt);
                w_err += W * m.weight * (wh - wa) * (wh - wa);
                w_ref += W * m.weight * wa * wa;
            }
        }
    }
    return {std::sqrt(phi_err / phi_ref), std::sqrt(w_err / w_ref)};
}

ErrorReport run_benchmark1d_cell(const BasisSetting& setting, int k, const NewtonConfig& config, Strategy strategy,
                                 TwoScaleState<1>* state_out) {
    const TwoScaleModel<1> model(benchmark1d_problem(setting, k));
    TwoScaleState<1> state = model.initial_state();
    // affine start through the boundary values, reference positions invert quadratic elements
    for (int n = 0; n < model.macro_mesh().num_nodes(); ++n) {
        state.q(n) = model.macro_mesh().nodes[n](0) * bench1d::phi_right() / bench1d::macro_length;
    }
    ErrorReport rep;
    rep.setting = setting.label();
    rep.k = k;
    rep.h = mesh_size(model.macro_mesh());
    const StepReport step = solve_step(model, state, 1.0, strategy, config);
    rep.converged = step.status == SolveStatus::Converged;
    rep.failure = step.failure;
    rep.iterations = step.num_iterations();
    const FieldErrors err = benchmark1d_errors(model, state);
    rep.err_phi = err.err_phi;
    rep.err_w = err.err_w;
    if (state_out) *state_out = std::move(state);
    return rep;
}

std::vector<ErrorReport> run_convergence_study(const std::vector<BasisSetting>& settings, int k_min, int k_max,
                                               const NewtonConfig& config, Strategy strategy,
                                               const CellCallback& on_cell) {
    if (k_min > k_max) throw std::invalid_argument("empty refinement range");
    std::vector<ErrorReport> out;
    for (const BasisSetting& s : settings) {
        for (int k = k_min; k <= k_max; ++k) {
            out.push_back(run_benchmark1d_cell(s, k, config, strategy));
            if (on_cell) on_cell(out.back());
        }
    }
    return out;
}

double fitted_order(const std::vector<double>& h, const std::vector<double>& err, int finest) {
    if (h.size() != err.size() || h.size() < 2) throw std::invalid_argument("order fit needs at least two points");
    std::vector<std::size_t> idx(h.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return h[a] < h[b]; });
    const std::size_t n = std::min<std::size_t>(idx.size(), static_cast<std::size_t>(std::max(2, finest)));
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(h[idx[i]]);
        const double y = std::log(err[idx[i]]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<OrderExpectation> expected_orders() {
    const double inf = std::numeric_limits<double>::infinity();
    return {
        {"[1,1]", "err_phi", 2.0, inf}, {"[0,1]", "err_phi", 2.0, inf}, {"[d,1]", "err_phi", 2.0, inf},
        {"[2,2]", "err_phi", 3.2, 3.8}, {"[d,2]", "err_phi", 3.2, 3.8}, {"[0,2]", "err_phi", 1.7, 2.3},
        {"[1,1]", "err_w", 1.4, 1.8},   {"[2,2]", "err_w", 2.7, 3.3},   {"[d,2]", "err_w", 2.7, 3.3},
        {"[0,1]", "err_w", 0.8, 1.2},   {"[0,2]", "err_w", 0.8, 1.2},   {"[d,1]", "err_w", 0.8, 1.2},
    };
}

std::string convergence_csv(const std::vector<ErrorReport>& reports) {
    std::ostringstream out;
    out << "setting,k,h,err_phi,err_w\n";
    char buf[256];
    for (const ErrorReport& r : reports) {
        std::snprintf(buf, sizeof buf, "\"%s\",%d,%.17g,%.17g,%.17g\n", r.setting.c_str(), r.k, r.h, r.err_phi,
                      r.err_w);
        out << buf;
    }
    return out.str();
}

nlohmann::json convergence_summary(const std::vector<ErrorReport>& reports, int finest) {
    std::map<std::string, std::vector<const ErrorReport*>> by_setting;
    for (const ErrorReport& r : reports) by_setting[r.setting].push_back(&r);

    nlohmann::json j;
    nlohmann::json cells = nlohmann::json::array();
    for (const ErrorReport& r : reports) {
        cells.push_back({{"setting", r.setting},
                         {"k", r.k},
                         {"h", r.h},
                         {"err_phi", r.err_phi},
                         {"err_w", r.err_w},
                         {"converged", r.converged},
                         {"iterations", r.iterations},
                         {"failure", r.failure}});
    }
    j["cells"] = cells;

    std::map<std::string, std::map<std::string, double>> orders;
    nlohmann::json fits = nlohmann::json::object();
    for (const auto& [setting, rs] : by_setting) {
        std::vector<double> h, ep, ew;
        for (const ErrorReport* r : rs) {
            h.push_back(r->h);
            ep.push_back(r->err_phi);
            ew.push_back(r->err_w);
        }
        if (h.size() < 2) continue;
        orders[setting]["err_phi"] = fitted_order(h, ep, finest);
        orders[setting]["err_w"] = fitted_order(h, ew, finest);
        fits[setting] = {{"err_phi", orders[setting]["err_phi"]}, {"err_w", orders[setting]["err_w"]}};
    }
    j["fitted_orders"] = fits;

    nlohmann::json checks = nlohmann::json::array();
    bool all = true;
    for (const OrderExpectation& e : expected_orders()) {
        if (!orders.count(e.setting)) continue;
        const double v = orders[e.setting][e.quantity];
        const bool ok = v >= e.lower && v <= e.upper;
        all = all && ok;
        nlohmann::json c{{"setting", e.setting}, {"quantity", e.quantity}, {"order", v}, {"lower", e.lower},
                         {"pass", ok}};
        if (std::isfinite(e.upper)) c["upper"] = e.upper;
        checks.push_back(c);
    }

    for (const auto& [setting, rs] : by_setting) {
        std::vector<const ErrorReport*> sorted = rs;
        std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->k < b->k; });
        bool mono = true;
        for (std::size_t i = 1; i < sorted.size(); ++i) {
            mono = mono && sorted[i]->err_phi < sorted[i - 1]->err_phi && sorted[i]->err_w < sorted[i - 1]->err_w;
        }
        checks.push_back({{"setting", setting}, {"quantity", "monotone"}, {"pass", mono}});
        all = all && mono;
    }

    // err_w of [0,1], [0,2] and [d,1] within 5 % at every k
    const std::vector<std::string> group{"[0,1]", "[0,2]", "[d,1]"};
    bool have_group = true;
    for (const std::string& s : group) have_group = have_group && by_setting.count(s);
    if (have_group) {
        double worst = 0.0;
        bool ok = true;
        for (const ErrorReport* r0 : by_setting["[0,1]"]) {
            std::vector<double> vals;
            for (const std::string& s : group) {
                for (const ErrorReport* r : by_setting[s])
                    if (r->k == r0->k) vals.push_back(r->err_w);
            }
            if (vals.size() != group.size()) continue;
            const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
            const double spread = (*hi - *lo) / *lo;
            worst = std::max(worst, spread);
            ok = ok && spread <= 0.05;
        }
        checks.push_back({{"setting", "[0,1],[0,2],[d,1]"}, {"quantity", "err_w overlap"}, {"spread", worst},
                          {"pass", ok}});
        all = all && ok;
    }
    j["checks"] = checks;
    j["pass"] = all;
    return j;
}

TwoScaleProblem<2> cook_problem(const CookSetup& setup) {
    TwoScaleProblem<2> p;
    p.macro_mesh = build_cook_mesh(setup.macro_nx, setup.macro_ny, 1);
    p.rve_mesh = build_rve_mesh(-3.0, 3.0, setup.rve_n, setup.rve_n, 1);
    p.materials = {std::make_shared<CookMaterial>(1), std::make_shared<CookMaterial>(2)};
    p.rve_material.resize(p.rve_mesh.num_elements());
    for (int e = 0; e < p.rve_mesh.num_elements(); ++e) {
        Vec<2> c = Vec<2>::Zero();
        const auto nodes = p.rve_mesh.element(e);
        for (int n : nodes) c += p.rve_mesh.nodes[n];
        c /= static_cast<double>(nodes.size());
        p.rve_material[e] = (std::abs(c(0)) < 1.0 || std::abs(c(1)) < 1.0) ? 1 : 0;
    }
    p.basis = setup.basis;
    p.micro_bc = MicroBc::Periodic;
    for (int node : boundary_nodes(p.macro_mesh, Side::XMin)) {
        for (int i = 0; i < 2; ++i) p.dirichlet.push_back({node, i, p.macro_mesh.nodes[node](i)});
    }
    p.tractions.push_back({boundary_facets(p.macro_mesh, Side::XMax), setup.traction});
    return p;
}

int cook_tip_node(const Mesh<2>& mesh) {
    return mesh.nodes_along(0) * mesh.nodes_along(1) - 1;
}

std::vector<CookCell> run_cook_study(const CookSetup& setup, const std::vector<int>& load_steps,
                                     const std::vector<Strategy>& strategies, const NewtonConfig& config,
                                     const CookCallback& on_step) {
    const TwoScaleModel<2> model(cook_problem(setup));
    std::vector<CookCell> cells;
    for (Strategy strategy : strategies) {
        for (int n_l : load_steps) {
            CookCell cell;
            cell.strategy = strategy;
            cell.load_steps = n_l;
            TwoScaleState<2> state = model.initial_state();
            StepCallback cb;
            if (on_step) cb = [&](const StepReport& s) { on_step(cell, s); };
            cell.report = run_load_schedule(model, state, LoadSchedule{n_l}, strategy, config, cb);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

std::string cook_csv(const std::vector<CookCell>& cells) {
    std::ostringstream out;
    out << "strategy,n_l,step,iteration,residual\n";
    char buf[256];
    for (const CookCell& c : cells) {
        for (const StepReport& s : c.report.steps) {
            for (const IterationRecord& r : s.iterations) {
                std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%.17g\n", to_string(c.strategy).c_str(), c.load_steps,
                              s.step, r.iteration, r.macro_residual);
                out << buf;
            }
        }
    }
    return out.str();
}

nlohmann::json cook_summary(const std::vector<CookCell>& cells) {
    nlohmann::json arr = nlohmann::json::array();
    for (const CookCell& c : cells) {
        std::vector<int> per_step;
        for (const StepReport& s : c.report.steps) per_step.push_back(s.num_iterations());
        arr.push_back({{"strategy", to_string(c.strategy)},
                       {"n_l", c.load_steps},
                       {"status", to_string(c.report.status)},
                       {"failed_step", c.report.failed_step},
                       {"failure", c.report.failure},
                       {"iterations_per_step", per_step},
                       {"max_iterations", c.report.max_iterations_per_step()},
                       {"wall_seconds", c.report.timings.wall}});
    }
    return {{"cells", arr}};
}

Tensor2<2> cauchy_stress(const Tensor2<2>& P, const Tensor2<2>& F) {
    return P * F.transpose() / F.determinant();
}

double von_mises(const Tensor2<2>& s) {
    return std::sqrt(s(0, 0) * s(0, 0) + s(1, 1) * s(1, 1) - s(0, 0) * s(1, 1) + 3.0 * s(0, 1) * s(0, 1));
}

NodalField macro_von_mises(const TwoScaleModel<2>& model, const TwoScaleState<2>& state) {
    const Mesh<2>& mesh = model.macro_mesh();
    NodalField f;
    f.positions.resize(mesh.num_nodes());
    for (int n = 0; n < mesh.num_nodes(); ++n) f.positions[n] = state.q.segment<2>(2 * n);
    std::vector<double> sum(mesh.num_nodes(), 0.0), weight(mesh.num_nodes(), 0.0);
    for (int k = 0; k < static_cast<int>(model.macro_points().size()); ++k) {
        const MacroPoint<2>& mp = model.macro_points()[k];
        const Tensor2<2> F = macro_gradient(model, state.q, k);
        const double vm = von_mises(cauchy_stress(average_stress(model, state, k), F));
        for (int n : mesh.element(mp.element)) {
            sum[n] += mp.weight * vm;
            weight[n] += mp.weight;
        }
    }
    f.values.resize(mesh.num_nodes());
    for (int n = 0; n < mesh.num_nodes(); ++n) f.values[n] = weight[n] > 0 ? sum[n] / weight[n] : 0.0;
    return f;
}

NodalField rve_von_mises(const TwoScaleModel<2>& model, const TwoScaleState<2>& state, int point) {
    const Mesh<2>& rve = model.rve_mesh();
    const Tensor2<2> F = macro_gradient(model, state.q, point);
    const Eigen::VectorXd w = expand_fluctuation(model, point_fluctuation(model, state, point));
    NodalField f;
    f.positions.resize(rve.num_nodes());
    for (int n = 0; n < rve.num_nodes(); ++n) f.positions[n] = F * rve.nodes[n] + w.segment<2>(2 * n);
    std::vector<double> sum(rve.num_nodes(), 0.0), weight(rve.num_nodes(), 0.0);
    const int nq = model.micro_points_per_element();
    for (int e = 0; e < rve.num_elements(); ++e) {
        const auto nodes = rve.element(e);
        for (int l = 0; l < nq; ++l) {
            const int p = e * nq + l;
            const auto grads = model.micro_gradients(p);
            Tensor2<2> Ft = F;
            for (std::size_t a = 0; a < nodes.size(); ++a) Ft += w.segment<2>(2 * nodes[a]) * grads.row(a);
            const Tensor2<2> P = model.micro_material(e).evaluate(Ft, model.micro_point(p)).stress;
            const double vm = von_mises(cauchy_stress(P, Ft));
            for (int n : nodes) {
                sum[n] += model.micro_weight(p) * vm;
                weight[n] += model.micro_weight(p);
            }
        }
    }
    f.values.resize(rve.num_nodes());
    for (int n = 0; n < rve.num_nodes(); ++n) f.values[n] = weight[n] > 0 ? sum[n] / weight[n] : 0.0;
    return f;
}

std::string field_csv(const NodalField& field) {
    std::ostringstream out;
    out << "x,y,von_mises\n";
    char buf[256];
    for (std::size_t n = 0; n < field.values.size(); ++n) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", field.positions[n](0), field.positions[n](1),
                      field.values[n]);
        out << buf;
    }
    return out.str();
}

}  // namespace fe2
