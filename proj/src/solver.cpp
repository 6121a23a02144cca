#include "fe2/solver.hpp"

#include "fe2/parallel.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <sstream>

namespace fe2 {

namespace {

class Divergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

using SparseLDLT = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;

// Factorization of one diagonal micro block. The symbolic analysis is done
// once per thread since all blocks share their pattern.
class BlockFactor {
public:
    void factorize(const Eigen::SparseMatrix<double>& L) {
        if (!analyzed_) {
            ldlt_.analyzePattern(L);
            analyzed_ = true;
        }
        ldlt_.factorize(L);
        use_lu_ = ldlt_.info() != Eigen::Success;
        if (use_lu_) {
            lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
            lu_->compute(L);
            if (lu_->info() != Eigen::Success) throw SingularSystem("micro block tangent is singular");
        }
    }

    template <class Rhs>
    auto solve(const Rhs& b) const {
        using Result = decltype(ldlt_.solve(b).eval());
        return use_lu_ ? Result(lu_->solve(b)) : Result(ldlt_.solve(b));
    }

private:
    SparseLDLT ldlt_;
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
    bool analyzed_ = false;
    bool use_lu_ = false;
};

struct BlockTimes {
    double assembly = 0.0;
    double factorization = 0.0;
    double solve = 0.0;
};

template <int Dim>
struct Slot {
    BlockSystem<Dim> sys;
    Eigen::MatrixXd X;  // L^-1 E, (block x local macro)
    Eigen::VectorXd y;  // L^-1 r
    Eigen::MatrixXd schur;
    Eigen::VectorXd rhs;
    std::vector<double> history;
    BlockTimes times;
};

// Everything one sweep over the blocks produces.
struct Pass {
    Eigen::VectorXd r_macro;  // free dofs, includes the external load
    Eigen::VectorXd rhs;      // right-hand side of the condensed system
    std::vector<Eigen::Triplet<double>> schur;
    std::vector<Eigen::MatrixXd> X;
    std::vector<Eigen::VectorXd> y;
    std::vector<std::vector<int>> macro_dofs;
    double micro_norm2 = 0.0;
    double max_block = 0.0;
    int max_inner = 0;
    std::vector<double> worst_history;
};

template <int Dim>
void condensation_pass(const TwoScaleModel<Dim>& model, TwoScaleState<Dim>& state, double load_factor,
                       Strategy strategy, bool equilibrate, const NewtonConfig& config, Pass& pass,
                       Timings& timings) {
    const int nm = model.num_free_macro();
    const int nblocks = model.num_blocks();
    const int bs = model.block_size();
    const Eigen::VectorXd f_ext = load_factor * model.unit_external_force();

    pass.r_macro = Eigen::VectorXd::Zero(nm);
    pass.rhs = Eigen::VectorXd::Zero(nm);
    for (int dof = 0; dof < model.num_macro_dofs(); ++dof) {
        const int f = model.macro_free_index(dof);
        if (f < 0) continue;
        pass.r_macro(f) = -f_ext(dof);
        pass.rhs(f) = f_ext(dof);
    }
    pass.schur.clear();
    pass.X.resize(nblocks);
    pass.y.resize(nblocks);
    pass.macro_dofs.resize(nblocks);
    pass.micro_norm2 = 0.0;
    pass.max_block = 0.0;
    pass.max_inner = 0;
    pass.worst_history.clear();

    const int batch = std::max(16, 4 * max_threads());
    std::vector<Slot<Dim>> slots(static_cast<std::size_t>(std::max(1, std::min(batch, nblocks))));
    std::vector<BlockFactor> factors(static_cast<std::size_t>(max_threads()));

    auto compute = [&](int b, int slot_id) {
        Slot<Dim>& slot = slots[slot_id];
        BlockSystem<Dim>& sys = slot.sys;
        BlockFactor& factor = factors[thread_id()];
        slot.history.clear();
        slot.times = {};
        auto w_block = state.w.segment(model.block_offset(b), bs);

        auto assemble = [&] {
            const auto t0 = Clock::now();
            assemble_block(model, state, b, KernelMode::FullTangent, sys);
            slot.times.assembly += seconds_since(t0);
        };
        auto refactor = [&] {
            const auto t0 = Clock::now();
            factor.factorize(sys.L);
            slot.times.factorization += seconds_since(t0);
        };

        assemble();
        if (equilibrate && bs > 0) {
            for (int it = 0;; ++it) {
                const double res = sys.normalized_micro_residual();
                slot.history.push_back(res);
                if (!std::isfinite(res) || res > config.divergence_threshold) {
                    throw Divergence("micro residual of RVE " + std::to_string(b) + " exceeded the bound");
                }
                if (res < config.eps_micro) break;
                if (it > 0 && res < config.micro_floor && res > 0.5 * slot.history[it - 1]) break;
                if (it == config.max_micro_iterations) {
                    throw Divergence("RVE " + std::to_string(b) + " did not equilibrate");
                }
                refactor();
                const auto t0 = Clock::now();
                w_block -= factor.solve(sys.r_micro);
                slot.times.solve += seconds_since(t0);
                assemble();
            }
        }

        if (bs > 0) {
            refactor();
            const auto t0 = Clock::now();
            slot.X = factor.solve(sys.E);
            if (strategy == Strategy::NullSpace) {
                slot.y = factor.solve(sys.r_micro);
            } else {
                slot.y.setZero(bs);
            }
            slot.schur = sys.K - sys.D * slot.X;
            slot.rhs = -(sys.r_macro - sys.D * slot.y);
            slot.times.solve += seconds_since(t0);
        } else {
            slot.X.resize(0, sys.K.cols());
            slot.y.resize(0);
            slot.schur = sys.K;
            slot.rhs = -sys.r_macro;
        }
    };

    auto consume = [&](int b, int slot_id) {
        Slot<Dim>& slot = slots[slot_id];
        const BlockSystem<Dim>& sys = slot.sys;
        const int nmac = static_cast<int>(sys.macro_dofs.size());
        for (int a = 0; a < nmac; ++a) {
            const int fa = model.macro_free_index(sys.macro_dofs[a]);
            if (fa < 0) continue;
            pass.r_macro(fa) += sys.r_macro(a);
            pass.rhs(fa) += slot.rhs(a);
            for (int c = 0; c < nmac; ++c) {
                const int fc = model.macro_free_index(sys.macro_dofs[c]);
                if (fc >= 0) pass.schur.emplace_back(fa, fc, slot.schur(a, c));
            }
        }
        pass.micro_norm2 += sys.r_micro.squaredNorm();
        const double res = bs > 0 ? sys.normalized_micro_residual() : 0.0;
        pass.max_block = std::max(pass.max_block, res);
        const int inner = slot.history.empty() ? 0 : static_cast<int>(slot.history.size()) - 1;
        if (equilibrate && (pass.worst_history.empty() || inner > pass.max_inner)) {
            pass.max_inner = inner;
            pass.worst_history = slot.history;
        }
        pass.X[b].swap(slot.X);
        pass.y[b].swap(slot.y);
        pass.macro_dofs[b] = sys.macro_dofs;
        timings.assembly += slot.times.assembly;
        timings.factorization += slot.times.factorization;
        timings.solve += slot.times.solve;
    };

    batched_for(nblocks, batch, compute, consume);
}

// Solves the condensed macro system and recovers the micro increments.
template <int Dim>
Increment back_substitute(const TwoScaleModel<Dim>& model, const Pass& pass, Strategy strategy, Timings& timings) {
    const int nm = model.num_free_macro();
    Increment inc;
    inc.dq = Eigen::VectorXd::Zero(nm);
    inc.dw = Eigen::VectorXd::Zero(model.total_micro_dofs());
    if (nm > 0) {
        Eigen::SparseMatrix<double> S(nm, nm);
        S.setFromTriplets(pass.schur.begin(), pass.schur.end());
        auto t0 = Clock::now();
        SparseLDLT ldlt(S);
        if (ldlt.info() == Eigen::Success) {
            timings.factorization += seconds_since(t0);
            t0 = Clock::now();
            inc.dq = ldlt.solve(pass.rhs);
        } else {
            Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
            lu.analyzePattern(S);
            lu.factorize(S);
            if (lu.info() != Eigen::Success) throw SingularSystem("condensed macro tangent is singular");
            timings.factorization += seconds_since(t0);
            t0 = Clock::now();
            inc.dq = lu.solve(pass.rhs);
        }
        timings.solve += seconds_since(t0);
        if (!inc.dq.allFinite()) throw SingularSystem("condensed macro solve produced non-finite values");
    }

    const int bs = model.block_size();
    if (bs == 0) return inc;
    const auto t0 = Clock::now();
#pragma omp parallel for schedule(static)
    for (int b = 0; b < model.num_blocks(); ++b) {
        const std::vector<int>& dofs = pass.macro_dofs[b];
        Eigen::VectorXd dq_local(static_cast<Eigen::Index>(dofs.size()));
        for (std::size_t a = 0; a < dofs.size(); ++a) {
            const int f = model.macro_free_index(dofs[a]);
            dq_local(a) = f < 0 ? 0.0 : inc.dq(f);
        }
        auto dw = inc.dw.segment(model.block_offset(b), bs);
        dw.noalias() = -(pass.X[b] * dq_local);
        if (strategy == Strategy::NullSpace) dw -= pass.y[b];
    }
    timings.solve += seconds_since(t0);
    return inc;
}

}  // namespace

std::string to_string(Strategy strategy) {
    return strategy == Strategy::Staggered ? "staggered" : "nullspace";
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "staggered" || name == "classical") return Strategy::Staggered;
    if (name == "nullspace" || name == "generalized" || name == "null-space") return Strategy::NullSpace;
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

std::string to_string(SolveStatus status) {
    return status == SolveStatus::Converged ? "converged" : "diverged";
}

void NewtonConfig::validate() const {
    if (!(eps_macro > 0.0)) throw std::invalid_argument("eps_macro must be positive");
    if (!(eps_micro > 0.0)) throw std::invalid_argument("eps_micro must be positive");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    if (max_micro_iterations < 1) throw std::invalid_argument("max_micro_iterations must be at least 1");
    if (!(micro_floor >= 0.0)) throw std::invalid_argument("micro_floor must be non-negative");
    if (!(divergence_threshold > eps_macro)) {
        throw std::invalid_argument("divergence_threshold must exceed eps_macro");
    }
}

void LoadSchedule::validate() const {
    if (steps < 1) throw std::invalid_argument("number of load steps must be at least 1");
}

std::vector<double> StepReport::residuals() const {
    std::vector<double> out;
    out.reserve(iterations.size());
    for (const IterationRecord& it : iterations) out.push_back(it.macro_residual);
    return out;
}

int SolveReport::max_iterations_per_step() const {
    int n = 0;
    for (const StepReport& s : steps) {
        if (s.status == SolveStatus::Converged) n = std::max(n, s.num_iterations());
    }
    return n;
}

nlohmann::json SolveReport::to_json() const {
    nlohmann::json j;
    j["strategy"] = to_string(strategy);
    j["load_steps"] = load_steps;
    j["status"] = to_string(status);
    j["failed_step"] = failed_step;
    j["failure"] = failure;
    j["timings"] = {{"assembly", timings.assembly},
                    {"factorization", timings.factorization},
                    {"solve", timings.solve},
                    {"wall", timings.wall}};
    nlohmann::json arr = nlohmann::json::array();
    for (const StepReport& s : steps) {
        nlohmann::json js;
        js["step"] = s.step;
        js["load_factor"] = s.load_factor;
        js["status"] = to_string(s.status);
        js["failure"] = s.failure;
        js["iterations"] = s.num_iterations();
        nlohmann::json its = nlohmann::json::array();
        for (const IterationRecord& r : s.iterations) {
            nlohmann::json ji{{"iteration", r.iteration},
                              {"macro_residual", r.macro_residual},
                              {"micro_residual", r.micro_residual},
                              {"max_block_residual", r.max_block_residual}};
            if (strategy == Strategy::Staggered) {
                ji["micro_iterations"] = r.micro_iterations;
                ji["micro_history"] = r.micro_history;
            }
            its.push_back(std::move(ji));
        }
        js["history"] = std::move(its);
        arr.push_back(std::move(js));
    }
    j["steps"] = std::move(arr);
    return j;
}

std::string SolveReport::to_csv() const {
    std::ostringstream out;
    const bool staggered = strategy == Strategy::Staggered;
    out << (staggered ? "step,iteration,macro_residual,micro_residual\n" : "step,iteration,macro_residual\n");
    char buf[128];
    for (const StepReport& s : steps) {
        for (const IterationRecord& r : s.iterations) {
            if (staggered) {
                std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", s.step, r.iteration, r.macro_residual,
                              r.max_block_residual);
            } else {
                std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", s.step, r.iteration, r.macro_residual);
            }
            out << buf;
        }
    }
    return out.str();
}

template <int Dim>
Increment condensed_increment(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state, double load_factor,
                              Strategy strategy) {
    TwoScaleState<Dim> copy = state;
    Pass pass;
    Timings timings;
    NewtonConfig config;
    condensation_pass(model, copy, load_factor, strategy, false, config, pass, timings);
    return back_substitute(model, pass, strategy, timings);
}

template <int Dim>
Eigen::SparseMatrix<double> condensed_tangent(const TwoScaleModel<Dim>& model, const TwoScaleState<Dim>& state) {
    TwoScaleState<Dim> copy = state;
    Pass pass;
    Timings timings;
    condensation_pass(model, copy, 1.0, Strategy::NullSpace, false, NewtonConfig{}, pass, timings);
    Eigen::SparseMatrix<double> S(model.num_free_macro(), model.num_free_macro());
    S.setFromTriplets(pass.schur.begin(), pass.schur.end());
    return S;
}

Increment monolithic_direct_solve(const BlockTangent& blocks, const Residuals& residuals) {
    const Eigen::SparseMatrix<double> A = blocks.full();
    Eigen::VectorXd rhs(A.rows());
    rhs << -residuals.r_macro, -residuals.r_micro;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) throw SingularSystem("monolithic system is singular");
    const Eigen::VectorXd x = lu.solve(rhs);
    Increment inc;
    inc.dq = x.head(blocks.macro_size());
    inc.dw = x.tail(blocks.micro_size());
    return inc;
}

template <int Dim>
void apply_increment(const TwoScaleModel<Dim>& model, TwoScaleState<Dim>& state, const Increment& inc) {
    for (int dof = 0; dof < model.num_macro_dofs(); ++dof) {
        const int f = model.macro_free_index(dof);
        if (f >= 0) state.q(dof) += inc.dq(f);
    }
    state.w += inc.dw;
}

template <int Dim>
StepReport solve_step(const TwoScaleModel<Dim>& model, TwoScaleState<Dim>& state, double load_factor,
                      Strategy strategy, const NewtonConfig& config, Timings* timings) {
    config.validate();
    Timings local;
    Timings& t = timings ? *timings : local;
    const auto t0 = Clock::now();
    StepReport report;
    report.load_factor = load_factor;
    Pass pass;
    try {
        for (int it = 0;; ++it) {
            condensation_pass(model, state, load_factor, strategy, strategy == Strategy::Staggered, config, pass, t);
            IterationRecord rec;
            rec.iteration = it;
            rec.macro_residual = pass.r_macro.norm();
            rec.micro_residual = std::sqrt(pass.micro_norm2);
            rec.max_block_residual = pass.max_block;
            rec.micro_iterations = pass.max_inner;
            rec.micro_history = pass.worst_history;
            report.iterations.push_back(rec);

            if (!std::isfinite(rec.macro_residual) || rec.macro_residual > config.divergence_threshold) {
                throw Divergence("macro residual exceeded the divergence bound");
            }
            if (rec.macro_residual < config.eps_macro) break;
            if (it == config.max_iterations) throw Divergence("maximum number of Newton iterations reached");
            apply_increment(model, state, back_substitute(model, pass, strategy, t));
        }
    } catch (const NonPositiveJacobian& e) {
        report.status = SolveStatus::Diverged;
        report.failure = e.what();
    } catch (const SingularSystem& e) {
        report.status = SolveStatus::Diverged;
        report.failure = e.what();
    } catch (const Divergence& e) {
        report.status = SolveStatus::Diverged;
        report.failure = e.what();
    }
    t.wall += seconds_since(t0);
    return report;
}

template <int Dim>
SolveReport solve_staggered(const TwoScaleModel<Dim>& model, TwoScaleState<Dim>& state, const NewtonConfig& config,
                            double load_factor) {
    SolveReport rep;
    rep.strategy = Strategy::Staggered;
    rep.steps.push_back(solve_step(model, state, load_factor, Strategy::Staggered, config, &rep.timings));
    rep.steps.back().step = 1;
    rep.status = rep.steps.back().status;
    if (!rep.converged()) {
        rep.failed_step = 1;
        rep.failure = rep.steps.back().failure;
    }
    return rep;
}

template <int Dim>
SolveReport solve_nullspace(const TwoScaleModel<Dim>& model, TwoScaleState<Dim>& state, const NewtonConfig& config,
                            double load_factor) {
    SolveReport rep;
    rep.strategy = Strategy::NullSpace;
    rep.steps.push_back(solve_step(model, state, load_factor, Strategy::NullSpace, config, &rep.timings));
    rep.steps.back().step = 1;
    rep.status = rep.steps.back().status;
    if (!rep.converged()) {
        rep.failed_step = 1;
        rep.failure = rep.steps.back().failure;
    }
    return rep;
}

template <int Dim>
SolveReport run_load_schedule(const TwoScaleModel<Dim>& model, TwoScaleState<Dim>& state,
                              const LoadSchedule& schedule, Strategy strategy, const NewtonConfig& config,
                              const StepCallback& on_step) {
    schedule.validate();
    config.validate();
    SolveReport rep;
    rep.strategy = strategy;
    rep.load_steps = schedule.steps;
    for (int k = 1; k <= schedule.steps; ++k) {
        StepReport step = solve_step(model, state, schedule.factor(k), strategy, config, &rep.timings);
        step.step = k;
        if (on_step) on_step(step);
        const bool failed = step.status == SolveStatus::Diverged;
        rep.steps.push_back(std::move(step));
        if (failed) {
            rep.status = SolveStatus::Diverged;
            rep.failed_step = k;
            rep.failure = rep.steps.back().failure;
            break;
        }
    }
    return rep;
}

DecayCheck quadratic_decay(const std::vector<double>& r, double min_ratio) {
    DecayCheck out;
    if (r.size() < 2) return out;
    out.worst_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < r.size(); ++i) {
        if (!(r[i] < 1e-2 * r[0]) || !(r[i] < 1.0)) continue;
        const double ratio = std::log(r[i + 1]) / std::log(r[i]);
        ++out.pairs;
        out.worst_ratio = std::min(out.worst_ratio, ratio);
        if (!(ratio >= min_ratio)) out.ok = false;
    }
    return out;
}

#define FE2_INSTANTIATE(D)                                                                                          \
    template Increment condensed_increment<D>(const TwoScaleModel<D>&, const TwoScaleState<D>&, double, Strategy); \
    template Eigen::SparseMatrix<double> condensed_tangent<D>(const TwoScaleModel<D>&, const TwoScaleState<D>&);   \
    template void apply_increment<D>(const TwoScaleModel<D>&, TwoScaleState<D>&, const Increment&);                \
    template StepReport solve_step<D>(const TwoScaleModel<D>&, TwoScaleState<D>&, double, Strategy,                \
                                      const NewtonConfig&, Timings*);                                              \
    template SolveReport solve_staggered<D>(const TwoScaleModel<D>&, TwoScaleState<D>&, const NewtonConfig&,       \
                                            double);                                                               \
    template SolveReport solve_nullspace<D>(const TwoScaleModel<D>&, TwoScaleState<D>&, const NewtonConfig&,       \
                                            double);                                                               \
    template SolveReport run_load_schedule<D>(const TwoScaleModel<D>&, TwoScaleState<D>&, const LoadSchedule&,     \
                                              Strategy, const NewtonConfig&, const StepCallback&);

FE2_INSTANTIATE(1)
FE2_INSTANTIATE(2)

}  // namespace fe2
