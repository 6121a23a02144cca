#ifndef FE2_SOLVER_HPP
#define FE2_SOLVER_HPP

#include "fe2/assembly.hpp"
#include "fe2/problem.hpp"

#include <json.hpp>

#include <Eigen/Sparse>

#include <functional>
#include <string>
#include <vector>

namespace fe2 {

/// Staggered: classical FE2, every RVE is equilibrated before each macro
/// update. NullSpace: one monolithic Newton loop on (q, w), the micro
/// unknowns eliminated block by block.
enum class Strategy { Staggered, NullSpace };

std::string to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& name);

struct NewtonConfig {
    double eps_macro = 1e-9;
    double eps_micro = 1e-13;  // per-RVE normalized residual, staggered only
    int max_iterations = 30;
    int max_micro_iterations = 30;
    // below this an RVE also counts as equilibrated once a correction no longer halves its residual
    double micro_floor = 1e-10;
    double divergence_threshold = 1e10;

    /// Throws std::invalid_argument on non-positive tolerances or limits.
    void validate() const;
};

struct LoadSchedule {
    int steps = 1;

    double factor(int k) const { return static_cast<double>(k) / steps; }
    void validate() const;
};

enum class SolveStatus { Converged, Diverged };

std::string to_string(SolveStatus status);

struct IterationRecord {
    int iteration = 0;
    double macro_residual = 0.0;
    double micro_residual = 0.0;         // Euclidean norm over all micro rows
    double max_block_residual = 0.0;     // worst per-RVE normalized residual
    int micro_iterations = 0;            // staggered: most inner iterations of any RVE
    std::vector<double> micro_history;   // staggered: inner history of that RVE
};

struct StepReport {
    int step = 0;
    double load_factor = 1.0;
    SolveStatus status = SolveStatus::Converged;
    std::string failure;
    std::vector<IterationRecord> iterations;  // one per residual evaluation

    /// Number of macro linear solves.
    int num_iterations() const { return iterations.empty() ? 0 : static_cast<int>(iterations.size()) - 1; }
    double final_residual() const { return iterations.empty() ? 0.0 : iterations.back().macro_residual; }
    std::vector<double> residuals() const;
};

struct Timings {
    double assembly = 0.0;       // summed over threads
    double factorization = 0.0;  // summed over threads
    double solve = 0.0;          // summed over threads
    double wall = 0.0;
};

struct SolveReport {
    Strategy strategy = Strategy::NullSpace;
    int load_steps = 1;
    SolveStatus status = SolveStatus::Converged;
    int failed_step = -1;
    std::string failure;
    std::vector<StepReport> steps;
    Timings timings;

    bool converged() const { return status == SolveStatus::Converged; }
    /// Largest iteration count over the converged steps.
    int max_iterations_per_step() const;
    nlohmann::json to_json() const;
    /// Columns: step,iteration,macro_residual,micro_residual (the latter only
    /// for the staggered strategy).
    std::string to_csv() const;
};

/// Raised by the linear algebra when a factorization breaks down.
class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Increment {
    Eigen::VectorXd dq;  // free macro dofs
    Eigen::VectorXd dw;  // all micro dofs
};

/// Newton increment from the block-wise elimination of the micro unknowns,
/// without the staggered inner loop. With Strategy::NullSpace it solves the
/// full Newton system; with Strategy::Staggered the micro residual is dropped
/// from the right-hand side.
template <int Dim>
Increment condensed_increment(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, double load_factor,
                              Strategy strategy);

/// The condensed macro tangent K - D L^-1 E over the free macro dofs.
template <int Dim>
Eigen::SparseMatrix<double> condensed_tangent(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state);

/// Sparse LU of the unreduced system [K D; E L] [dq; dw] = -[r_macro; r_micro].
Increment monolithic_direct_solve(const BlockTangent& blocks, const Residuals& residuals);

/// Applies an increment to a state (free macro dofs and all micro dofs).
template <int Dim>
void apply_increment(const TwoScaleModel<Dim>& model, TwoScaleState<Dim>& state, const Increment& inc);

/// Newton iterations for one load level, updating `state` in place.
/// Divergence is reported in the returned record, never thrown.
template <int Dim>
StepReport solve_step(const TwoScaleModel<Dim>& model, TwoScaleState<Dim>& state, double load_factor,
                      Strategy strategy, const NewtonConfig& config, Timings* timings = nullptr);

template <int Dim>
SolveReport solve_staggered(const TwoScaleModel<Dim>& model, TwoScaleState<Dim>& state, const NewtonConfig& config,
                            double load_factor = 1.0);

template <int Dim>
SolveReport solve_nullspace(const TwoScaleModel<Dim>& model, TwoScaleState<Dim>& state, const NewtonConfig& config,
                            double load_factor = 1.0);

using StepCallback = std::function<void(const StepReport&)>;

/// Incremental loading with warm starts; stops at the first diverged step.
template <int Dim>
SolveReport run_load_schedule(const TwoScaleModel<Dim>& model, TwoScaleState<Dim>& state,
                              const LoadSchedule& schedule, Strategy strategy, const NewtonConfig& config,
                              const StepCallback& on_step = {});

struct DecayCheck {
    bool ok = true;
    double worst_ratio = 0.0;  // smallest log(r_{i+1}) / log(r_i) examined
    int pairs = 0;
};

/// Requires log(r_{i+1}) / log(r_i) >= min_ratio for every pair with
/// r_i < 1e-2 r_0 and r_i < 1 (the log ratio is meaningless above 1).
DecayCheck quadratic_decay(const std::vector<double>& residuals, double min_ratio = 1.7);

}  // namespace fe2

#endif
