#ifndef FE2_STUDIES_HPP
#define FE2_STUDIES_HPP

#include "fe2/problem.hpp"
#include "fe2/solver.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace fe2 {

// ---------------------------------------------------------------------------
// One-dimensional benchmark with closed-form solution.
// Macro domain (0, 1000), RVE (0, 1), W = lambda(X~) (F^2 - 1), unit body
// load, homogeneous boundary fluctuations.

namespace bench1d {

constexpr double macro_length = 1000.0;
constexpr double micro_length = 1.0;
constexpr double body_load = 1.0;

double lambda(double Xt);
/// Harmonic mean of lambda over the RVE, 40 pi / (3 sqrt 3).
double lambda_eff();
double phi(double X);
double F(double X);
/// d^2 phi / dX^2, constant.
double phi_curvature();
double w(double X, double Xt);
/// d w / d X~.
double dw(double X, double Xt);
/// Prescribed value at X = 1000, 37575 sqrt 3 / (2 pi).
double phi_right();

}  // namespace bench1d

struct AnalyticSolution1D {
    double phi = 0.0;
    double w = 0.0;
    double F = 0.0;
};

/// Throws std::out_of_range outside [0, 1000] x [0, 1].
AnalyticSolution1D analytic_solution_1d(double X, double Xt);

struct AnalyticCheck {
    double compliance = 0.0;         // |int 1/lambda - 3 sqrt3 / (40 pi)| (closed form and quadrature)
    double curvature = 0.0;          // |phi'' + 3 sqrt3 / (80 pi)|
    double homogenized_ode = 0.0;    // max |lambda_eff phi'' + 1/2|
    double micro_equilibrium = 0.0;  // max relative deviation of lambda F~ from its mean, 100 x 100 samples
    double boundary = 0.0;           // phi(0), phi(1000) and w on the RVE boundary
    double tolerance = 1e-12;

    bool passed() const;
    nlohmann::json to_json() const;
};

AnalyticCheck verify_analytic_equilibrium(double tolerance = 1e-12);

/// Basis setting [a, p]: fluctuation interpolation a in X (Dirac, 0, 1, 2)
/// and polynomial order p of the macro elements and of the RVE elements.
struct BasisSetting {
    MacroBasisKind basis = MacroBasisKind::Linear;
    int order = 1;

    /// "1,1", "2,2", "0,1", "0,2", "d,1", "d,2" (also "delta,1", "[1,1]").
    static BasisSetting parse(const std::string& text);
    std::string label() const;  // "[1,1]", "[d,2]", ...
};

/// 2^k macro elements and 2^k RVE elements.
TwoScaleProblem<1> benchmark1d_problem(const BasisSetting& setting, int k);

struct ErrorReport {
    std::string setting;
    int k = 0;
    double h = 0.0;
    double err_phi = 0.0;
    double err_w = 0.0;
    bool converged = true;
    std::string failure;
    int iterations = 0;
};

/// Relative L2 errors of a solved state. The Dirac fluctuation is extended
/// across each macro element by Lagrange interpolation through its
/// quadrature-point values. Integration uses order + 3 Gauss points per
/// direction on every macro and RVE element.
struct FieldErrors {
    double err_phi = 0.0;
    double err_w = 0.0;
};
FieldErrors benchmark1d_errors(const TwoScaleModel<1>& model, const TwoScaleState<1>& state);

/// Fluctuation at a macro coordinate (reference coordinate xi of element
/// `element`), reduced micro coefficients.
Eigen::VectorXd fluctuation_at(const TwoScaleModel<1>& model, const TwoScaleState<1>& state, int element,
                               double xi);

ErrorReport run_benchmark1d_cell(const BasisSetting& setting, int k, const NewtonConfig& config, Strategy strategy,
                                 TwoScaleState<1>* state_out = nullptr);

using CellCallback = std::function<void(const ErrorReport&)>;

std::vector<ErrorReport> run_convergence_study(const std::vector<BasisSetting>& settings, int k_min, int k_max,
                                               const NewtonConfig& config, Strategy strategy,
                                               const CellCallback& on_cell = {});

/// Least-squares slope of log(err) against log(h) over the `finest` smallest h.
double fitted_order(const std::vector<double>& h, const std::vector<double>& err, int finest = 4);

struct OrderExpectation {
    std::string setting;
    std::string quantity;  // "err_phi" or "err_w"
    double lower = 0.0;
    double upper = 0.0;
};

/// Expected fitted orders of the benchmark per setting.
std::vector<OrderExpectation> expected_orders();

std::string convergence_csv(const std::vector<ErrorReport>& reports);
/// Fitted orders, overlap check and pass/fail per expectation.
nlohmann::json convergence_summary(const std::vector<ErrorReport>& reports, int finest = 4);

// ---------------------------------------------------------------------------
// Cook's membrane with a two-phase RVE.

struct CookSetup {
    int macro_nx = 20;
    int macro_ny = 20;
    int rve_n = 30;
    MacroBasisKind basis = MacroBasisKind::Dirac;
    Vec<2> traction = Vec<2>(-5.0, 10.0);
};

TwoScaleProblem<2> cook_problem(const CookSetup& setup);

/// Node at the upper right corner of the membrane.
int cook_tip_node(const Mesh<2>& mesh);

struct CookCell {
    Strategy strategy = Strategy::NullSpace;
    int load_steps = 1;
    SolveReport report;
};

using CookCallback = std::function<void(const CookCell&, const StepReport&)>;

/// One solve per (strategy, n_l), strategies outermost, each from the
/// reference configuration.
std::vector<CookCell> run_cook_study(const CookSetup& setup, const std::vector<int>& load_steps,
                                     const std::vector<Strategy>& strategies, const NewtonConfig& config,
                                     const CookCallback& on_step = {});

/// Columns strategy,n_l,step,iteration,residual.
std::string cook_csv(const std::vector<CookCell>& cells);
nlohmann::json cook_summary(const std::vector<CookCell>& cells);

// ---------------------------------------------------------------------------
// Post-processing

Tensor2<2> cauchy_stress(const Tensor2<2>& P, const Tensor2<2>& F);
/// sqrt(s11^2 + s22^2 - s11 s22 + 3 s12^2)
double von_mises(const Tensor2<2>& sigma);

struct NodalField {
    std::vector<Vec<2>> positions;  // deformed
    std::vector<double> values;
};

/// Homogenized von Mises stress on the macro mesh, averaged to the nodes
/// with quadrature weights.
NodalField macro_von_mises(const TwoScaleModel<2>& model, const TwoScaleState<2>& state);
/// Micro von Mises stress in the RVE attached to a macro quadrature point.
NodalField rve_von_mises(const TwoScaleModel<2>& model, const TwoScaleState<2>& state, int point);

/// Columns x,y,von_mises.
std::string field_csv(const NodalField& field);

}  // namespace fe2

#endif
