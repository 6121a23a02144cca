#ifndef FE2_CLI_HPP
#define FE2_CLI_HPP

#include "fe2/solver.hpp"
#include "fe2/studies.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fe2::cli {

enum ExitCode : int { Success = 0, ConfigError = 2, Diverged = 3, InternalError = 4 };

class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class StudyKind { Benchmark1D, Cook, Custom };

std::string to_string(StudyKind kind);
StudyKind study_from_string(const std::string& name);

struct RunConfig {
    StudyKind study = StudyKind::Cook;
    Strategy strategy = Strategy::NullSpace;

    // benchmark1d
    std::vector<BasisSetting> settings;  // empty: all six
    int k_min = 4;
    int k_max = 7;

    // cook and custom
    std::vector<int> load_steps{2};
    int macro_nx = 20;
    int macro_ny = 20;
    int rve_n = 30;
    MacroBasisKind basis = MacroBasisKind::Dirac;
    Vec<2> traction = Vec<2>(-5.0, 10.0);

    // custom only: cantilever block with the two-phase RVE
    MicroBc micro_bc = MicroBc::Periodic;
    int macro_order = 1;
    double width = 48.0;
    double height = 12.0;

    NewtonConfig newton;
    int threads = 0;  // 0: OpenMP default
    std::uint64_t seed = 1;
    std::string out_dir = ".";

    void validate() const;
    nlohmann::json to_json() const;
};

/// Raw key/value overrides as they come from the command line, section.key
/// naming as in the config file (e.g. "solver.eps_macro").
using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Reads an INI file (may be empty for defaults) and applies the overrides
/// on top. Unknown sections or keys, unreadable files, malformed values and
/// contradictory options throw ConfigurationError.
RunConfig parse_config(const std::string& path, const Overrides& overrides, const std::string& default_out_dir = ".");

/// Keys accepted in the config file.
const std::vector<std::string>& known_keys();

/// Runs the configured study, writes its artifacts into out_dir and returns
/// the exit code (Success or Diverged). Progress goes to `log`.
int run(const RunConfig& config, std::ostream& log);

struct CheckResult {
    int states = 0;
    double worst_oracle = 0.0;   // relative difference to the monolithic solve
    double worst_tangent = 0.0;  // relative difference to finite differences
    bool passed = false;
    nlohmann::json to_json() const;
};

/// Randomized self check on small two-scale states: null-space increment
/// against the monolithic solve and tangent against finite differences.
CheckResult self_check(std::uint64_t seed, int states = 24);

/// Writes {"exit_code", "kind", "message"} to out_dir/error.json when the
/// directory is writable; never throws.
void write_error_report(const std::string& out_dir, int code, const std::string& kind, const std::string& message);

/// Full command-line entry point.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fe2::cli

#endif
