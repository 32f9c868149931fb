#pragma once

#include "aggflow/diagnostics.hpp"
#include "aggflow/flows.hpp"
#include "aggflow/kernels.hpp"
#include "aggflow/spectral.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aggflow {

enum class Integrator { etd2, etd_rk4 };

std::string_view to_string(Integrator i);
Integrator parse_integrator(std::string_view s);

struct SolverConfig {
  double gamma = 1.5;
  MultiplierConvention convention = MultiplierConvention::laplacian_consistent;
  double dt_init = 1e-3;
  double cfl = 0.4;
  double dt_floor = 1e-9;
  double blowup_l2_factor = 1e6;
  double horizon = 1.0;
  Integrator integrator = Integrator::etd_rk4;
  int record_every = 1;
  /// Radius b of the second-moment cut-off and the annular-mass region.
  double moment_radius = 0.1;
  /// Transport runs: hyperviscous filter rate * (|k| / (n/3))^order replaces dissipation.
  double filter_rate = 1e4;
  double filter_order = 36.0;
  double filter_loss_budget = 1e-4;
};

/// Throws std::invalid_argument naming the offending field; returns soft warnings.
std::vector<std::string> validate(const SolverConfig& cfg);

enum class Trigger { l2_threshold, dt_floor, nonfinite };
std::string_view to_string(Trigger t);

struct Outcome {
  bool blowup = false;
  double t_star = 0.0;  ///< trigger time for a blowup, horizon otherwise
  Trigger trigger = Trigger::l2_threshold;

  std::string label() const { return blowup ? "blowup" : "global"; }
};

struct RunRecord {
  SolverConfig config;
  std::vector<DiagnosticsVector> series;
  Outcome outcome;
  std::vector<std::string> flags;
  std::optional<Field> final_state;
  /// Solver state at the end of the run, before the final inverse transform.
  std::optional<SpectralField> final_spectrum;
  double initial_l2_dist = 0.0;
  double max_l2_dist = 0.0;
  double max_mean_drift = 0.0;  ///< max |mean(t) - mean(0)| over every step
  double min_value = 0.0;       ///< min over every step of min rho
  double initial_max = 0.0;
  double initial_norm = 0.0;  ///< full L2 norm including the mean
  double final_norm = 0.0;
  long steps = 0;

  bool has_flag(std::string_view f) const;
  const DiagnosticsVector& last() const { return series.back(); }
};

/// Raised by step() when the state stops being finite.
class NonFiniteState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// phi_k(z) = sum_j z^j / (j + k)!, the exponential-integrator weight functions.
double phi_function(int k, double z);

/// Explicit part -A u.grad rho + div(rho grad K * rho), evaluated pseudo-spectrally in
/// divergence form with 2/3 dealiasing of the products.
Field rhs_nonlinear(const Field& rho, const VelocityField& u, double A, const KernelSpec& ks);

/// One exponential-integrator step of the full equation; the linear part -Lambda^gamma is exact.
Field step(const Field& rho, double t, double dt, const SolverConfig& cfg, const VelocityField& u, double A,
           const KernelSpec& ks);

/// Decay rate lambda(k) of the linear part in the configured convention.
Eigen::ArrayXd dissipation_rates(const Grid& g, const SolverConfig& cfg);

/// Extra times at which the loop lands exactly and records a sample.
struct RunOptions {
  std::vector<double> checkpoints;
  bool keep_final_state = true;
};

RunRecord run_nonlinear(const Field& rho0, const VelocityField& u, double A, const KernelSpec& ks,
                        const SolverConfig& cfg, const RunOptions& opts = {});

/// Mean of mu0 is removed before integrating.
RunRecord run_linear(const Field& mu0, const VelocityField& u, double A, const SolverConfig& cfg,
                     const RunOptions& opts = {});

/// Pure transport with a spectral filter; records L2 and H^{gamma/2} norms.
RunRecord run_transport(const Field& eta0, const VelocityField& v, const SolverConfig& cfg,
                        const RunOptions& opts = {});

/// Least-squares slope of log(hgamma2) against t over a series.
double fitted_log_growth_rate(const std::vector<DiagnosticsVector>& series);

struct AmplitudeProblem {
  Field rho0;
  VelocityField u;
  KernelSpec ks;
  SolverConfig config;
};

enum class BracketStatus { bracketed, non_monotone, all_global, all_blowup };
std::string_view to_string(BracketStatus s);

struct ThresholdResult {
  BracketStatus status = BracketStatus::all_global;
  std::optional<double> a_low;   ///< largest amplitude with a blowup outcome
  std::optional<double> a_high;  ///< smallest amplitude with a global outcome
  std::vector<double> amplitudes;
  std::vector<RunRecord> runs;   ///< one per amplitude, same order
};

/// Run the problem at every amplitude (in parallel over `threads` workers) and bracket the
/// transition from blowup to global existence.
ThresholdResult find_threshold_amplitude(const AmplitudeProblem& problem, const std::vector<double>& amplitudes,
                                         int threads = 1);

}  // namespace aggflow
