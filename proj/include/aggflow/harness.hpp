#pragma once

#include "aggflow/dynamics.hpp"
#include "aggflow/flows.hpp"
#include "aggflow/kernels.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aggflow {

inline constexpr std::string_view version_string = "aggflow 0.1.0";

/// Slope constant of the transport growth bound, fitted slope <= C * ||Lambda^{gamma/2+d/2+1} v||.
/// Measured over the calibration flows in tests/unit/test_transport_calibration.cpp and frozen.
inline constexpr double transport_bound_constant = 2.0;

/// Invalid configuration; `key` is "section.name" (or the file path for I/O problems).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class ExperimentKind { run, sweep_A, relax, transport_bound, lp_check, kernel_check };
std::string_view to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(std::string_view s);

enum class InitialKind { constant, gaussian, cosine, random_band_limited, from_file };
std::string_view to_string(InitialKind k);

struct InitialSpec {
  InitialKind kind = InitialKind::constant;
  double value = 1.0;                       ///< constant
  double mass = 1.0;                        ///< gaussian
  double width = 0.1;                       ///< gaussian standard deviation
  std::array<double, 3> center{0, 0, 0};   ///< gaussian
  std::array<int, 3> wavevector{1, 0, 0};   ///< cosine
  double amplitude = 1.0;                   ///< cosine, random_band_limited
  double mean = 0.0;                        ///< cosine, random_band_limited
  std::uint64_t seed = 1;                   ///< random_band_limited
  int band = 4;                             ///< random_band_limited: max |k_j|
  std::filesystem::path file;               ///< from_file
};

struct KernelConfig {
  KernelKind kind = KernelKind::none;
  double a = 0.0;
  double eps = 0.2;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::run;
  std::filesystem::path output = "out";
  int dim = 2;
  int n = 64;
  KernelConfig kernel;
  FlowSpec flow;
  SolverConfig solver;
  InitialSpec initial;
  /// sweep_A and relax amplitudes; run uses flow.amplitude.
  std::vector<double> amplitudes;
  /// relax sampling times.
  std::vector<double> times;
  bool dump_final = false;
  /// Echo of every key as read, "section.key" -> raw text, in file order.
  std::vector<std::pair<std::string, std::string>> echo;
};

/// Parse the sectioned key = value format; unknown sections and keys are errors.
/// With `kind` set, experiment.kind may be omitted but must agree when present.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".",
                              std::optional<ExperimentKind> kind = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<ExperimentKind> kind = std::nullopt);

/// Nonnegative Gaussians are normalised so the mean equals the mass exactly up to rounding.
Field make_initial_data(const InitialSpec& spec, const Grid& grid);

KernelSpec make_kernel(const KernelConfig& k, const Grid& grid);

struct RunContext {
  std::filesystem::path output_dir;
  int threads = 1;
  std::function<void(const std::string&)> progress;
};

/// Output directory precedence: explicit argument, AGGFLOW_OUTPUT_DIR, config.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& cli);
/// Thread count precedence: explicit argument, AGGFLOW_THREADS, 1.
int resolve_threads(std::optional<int> cli);

struct ExperimentResult {
  std::vector<std::filesystem::path> artifacts;
  /// False when a check experiment found a failing property.
  bool checks_passed = true;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunContext& ctx);

/// Series CSV text with the fixed column header.
std::string series_csv(const std::vector<DiagnosticsVector>& series);

struct RelaxRow {
  double amplitude = 0.0;
  double tau = 0.0;
  double ratio = 0.0;
};

/// Decay ratios ||mu^A(tau)|| / ||mu_0|| for every amplitude and time.
std::vector<RelaxRow> relaxation_ratios(const ExperimentConfig& cfg, int threads = 1);

struct TransportResult {
  double slope = 0.0;       ///< fitted growth rate of log ||eta||_{H^{gamma/2}}
  double flow_norm = 0.0;   ///< ||Lambda^{gamma/2+d/2+1} v||_{L2}
  double bound = 0.0;       ///< transport_bound_constant * flow_norm
  double filter_loss = 0.0; ///< 1 - ||eta(T)|| / ||eta_0||
  bool resolution_limited = false;
  RunRecord record;
};

TransportResult transport_study(const ExperimentConfig& cfg);

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckLine> lp_checks(const ExperimentConfig& cfg);
std::vector<CheckLine> kernel_checks(const ExperimentConfig& cfg);

}  // namespace aggflow
