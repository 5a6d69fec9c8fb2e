#pragma once

// Command implementations behind the msfsolve executable: simulation with gated
// diagnostics and CSV export, matrix certification, and convergence studies.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msf/config.hpp"
#include "msf/diagnostics.hpp"

namespace msf {

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitGate = 2, kExitAbort = 3 };

struct GateCounts {
    int steps = 0;
    int entropy_failures = 0;
    int temperature_failures = 0;
    int positivity_failures = 0;
    bool conservation_flagged = false;
    double worst_entropy_margin = 0.0;
    double max_entropy_increase = 0.0;  ///< max over steps of Phi_k - Phi_{k-1}

    bool ok() const {
        return entropy_failures == 0 && temperature_failures == 0 && positivity_failures == 0 &&
               !conservation_flagged;
    }
    std::vector<std::string> triggered() const;
};

struct SimulationResult {
    GateCounts gates;
    MixtureState initial;
    MixtureState final_state;
    double t = 0.0;
    bool aborted = false;
    std::string abort_reason;
    ConservationReport conservation;
    NormsReport norms;
    int exit_code = kExitOk;
};

using LedgerCallback =
    std::function<void(const StepRecord&, const EntropyLedger&, const TemperatureLedger&)>;

/// Runs a validated config, evaluating every gate per accepted step. With `out_dir`,
/// writes fields.csv, diagnostics.csv, resolved.cfg and manifest.json there.
SimulationResult simulate(const Config& cfg,
                          const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                          const LedgerCallback& on_step = {});

int cmd_run(const std::filesystem::path& config, const std::optional<std::filesystem::path>& out,
            std::ostream& log);

/// Independent runs on worker threads; each writes to <out>/<config stem>.
int cmd_sweep(const std::vector<std::filesystem::path>& configs,
              const std::optional<std::filesystem::path>& out, std::ostream& log);

int cmd_check_matrix(const std::filesystem::path& config,
                     const std::optional<std::filesystem::path>& out, std::ostream& log);

struct ConvergenceRow {
    std::string kind;  ///< "space" or "time"
    double resolution; ///< cells or tau
    double error;
    double order;      ///< NaN for the first row of each ladder
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    bool spatial_ok = false;
    bool temporal_ok = false;
};

/// Spatial self-convergence over convergence.cells at fixed tau and temporal convergence over
/// convergence.taus at fixed cells against tau_min / convergence.reference_factor.
ConvergenceStudy convergence_study(const Config& cfg);

int cmd_convergence(const std::filesystem::path& config,
                    const std::optional<std::filesystem::path>& out, std::ostream& log);

}  // namespace msf
