#pragma once

#include <string>

#include "aeroarm/sim_harness.hpp"

namespace aeroarm {

inline constexpr const char* kCodeVersion = "aeroarm 1.0.0";

// ============================================================================
// Scenario configuration file: flat `key = value` lines, `#` comments.
// Every key carries its unit in the name. Unknown keys are rejected so a typo
// cannot silently fall back to a default.
// ============================================================================

[[nodiscard]] ScenarioConfig parse_config_text(const std::string& text);
[[nodiscard]] ScenarioConfig load_config(const std::string& path);

// Canonical serialization: every key, fixed order, full double precision.
// parse(serialize(x)) == x, and serialize(parse(serialize(x))) is byte-stable.
[[nodiscard]] std::string serialize_config(const ScenarioConfig& config);

// ============================================================================
// Log serialization (CSV, one row per control tick, header row with units)
// ============================================================================

[[nodiscard]] std::string log_to_csv(const SimLog& log);
// The tick spacing is recovered from the time column (zero when the log holds
// fewer than two rows). Saturation/solver events are recoverable from the
// flag columns; the divergence marker travels in the run metadata instead.
[[nodiscard]] SimLog log_from_csv(const std::string& text);
[[nodiscard]] SimLog read_log_csv(const std::string& path);

// Atomic file write: the content lands under a temporary name in the target
// directory and is renamed into place. Throws IOFailure.
void write_file_atomic(const std::string& path, const std::string& content);

// ============================================================================
// Run summary
// ============================================================================

// Metrics computed from a log alone. Time windows are expressed as fractions
// of the run length so the summary needs no side channel: the "early" window
// is the first tenth, the pre/post split sits at the half (where the default
// scenario applies its plant step), the pre window starts at one third, and
// the steady-state window is the final quarter.
struct RunSummary {
  double duration = 0.0;  // s
  int ticks = 0;

  // Force-estimation error |fe_hat - fe_true| per task axis.
  Vec6 force_err_peak_early = Vec6::Zero();  // max over the first tenth
  Vec6 force_err_peak_late = Vec6::Zero();   // max over [third, end]
  double force_err_settle = -1.0;  // s; first entry into the pre-window band

  // Task tracking error chi - ref per axis.
  Vec6 task_rms_pre = Vec6::Zero();    // RMS over [third, half)
  Vec6 task_rms_post = Vec6::Zero();   // RMS over [half, end]
  Vec6 task_peak_post = Vec6::Zero();  // max |err| over [half, end]
  Vec6 task_rms_final = Vec6::Zero();  // RMS over the final quarter
  double terminal_task_err = 0.0;      // |err| norm at the last tick

  // First time after the half split at which a sliding one-second RMS of the
  // end-effector pitch/roll error re-enters the pre-window RMS band.
  double theta_recovery = -1.0;  // s after the split; -1 when never
  double phi_recovery = -1.0;

  int thrust_saturation_ticks = 0;
  int joint_saturation_ticks = 0;
  int dls_ticks = 0;
  int tilt_guard_ticks = 0;
  int estimator_resets = 0;
  bool diverged = false;
  double divergence_time = -1.0;

  double wall_clock = 0.0;  // s, filled by the caller
};

[[nodiscard]] RunSummary summarize(const SimLog& log);
[[nodiscard]] std::string render_summary(const RunSummary& summary);

// ============================================================================
// Run outputs
// ============================================================================

struct RunOutputs {
  std::string csv_path;
  std::string metadata_path;
  std::string summary_path;
};

// Writes log.csv, metadata.cfg (resolved config, reusable as an input config)
// and summary.txt into dir, creating it if needed. Throws IOFailure.
RunOutputs write_run_outputs(const SimLog& log, const ScenarioConfig& config,
                             const std::string& dir, double wall_clock);

// Emits a standalone python plotting script next to the log. The script reads
// the CSV and renders force-estimation, tracking and actuator charts.
[[nodiscard]] std::string emit_plot_script(const std::string& dir);

// ============================================================================
// Command-line entry point (subcommands: simulate, validate, analyze, plots)
// Exit codes: 0 ok, 1 runtime divergence, 2 invalid configuration, 3 IO.
// ============================================================================

int run_cli(int argc, const char* const* argv);

}  // namespace aeroarm
