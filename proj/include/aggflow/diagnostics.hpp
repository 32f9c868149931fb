#pragma once

#include "aggflow/spectral.hpp"

#include <array>
#include <string>
#include <string_view>

namespace aggflow {

/// One sample of the recorded observables. Column order of the series CSV.
struct DiagnosticsVector {
  double t = 0.0;
  double mean = 0.0;
  double min_val = 0.0;
  double l2_dist = 0.0;      ///< ||rho - mean||_{L2}
  double hgamma2 = 0.0;      ///< ||rho||_{H^{gamma/2}}, homogeneous, |k|^s convention
  double moment2 = 0.0;      ///< int |x|^2 rho phi_b
  double annular_mass = 0.0; ///< int_{|x| >= b} |rho|
  double crit_r2 = 0.0;      ///< int_0^t ||rho - mean||^2
  double crit_r4 = 0.0;      ///< int_0^t ||rho - mean||^4
  double dt = 0.0;           ///< step used to reach t
  double tail_frac = 0.0;    ///< share of fluctuation energy in |k| > n/3

  static constexpr std::array<std::string_view, 11> columns{
      "t", "mean", "min", "l2_dist", "hgamma2", "moment2", "annular_mass", "crit_r2", "crit_r4", "dt", "tail_frac"};
  std::array<double, 11> as_array() const;
};

/// Smooth cut-off at scale b: 1 on |x| <= b/2, 0 on |x| >= b.
double moment_cutoff(double r, double b);

/// Quadrature of |x|^2 rho(x) phi(x/b) over the box. Requires 0 < b < 1/8 and b >= 4h.
double second_moment(const Field& rho, double b);

struct AnnularMass {
  double mass = 0.0;
  bool negative_values = false;  ///< |rho| was integrated because rho < 0 somewhere
};
/// Quadrature of |rho| over nodes with |x| >= b.
AnnularMass annular_mass(const Field& rho, double b);

enum class CriticalityRegime { supercritical, critical, subcritical };
std::string_view to_string(CriticalityRegime r);

struct CriticalityReport {
  double gamma = 0.0;
  double gamma_c = 0.0;         ///< L1-critical exponent 2 + a
  double lp_critical = 0.0;     ///< 2 + a - d (1 - 1/p)
  CriticalityRegime regime = CriticalityRegime::critical;
  bool in_analysed_range = false;  ///< gamma > 1
};
CriticalityReport criticality_report(double a, double gamma, double p, int dim);

/// Every observable that depends only on the state (t, dt and running integrals are left at 0).
DiagnosticsVector measure_state(const Field& rho, const SpectralField& rho_hat, double gamma, double moment_radius);

}  // namespace aggflow
