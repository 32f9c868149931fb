#include "aggflow/diagnostics.hpp"

#include "aggflow/format.hpp"
#include "aggflow/littlewood_paley.hpp"

#include <cmath>
#include <stdexcept>

namespace aggflow {

std::array<double, 11> DiagnosticsVector::as_array() const {
  return {t, mean, min_val, l2_dist, hgamma2, moment2, annular_mass, crit_r2, crit_r4, dt, tail_frac};
}

double moment_cutoff(double r, double b) { return smooth_step_down((r - 0.5 * b) / (0.5 * b)); }

double second_moment(const Field& rho, double b) {
  if (!(b > 0.0 && b < 0.125)) throw std::invalid_argument("second_moment: radius b must lie in (0, 1/8)");
  if (b < 4.0 * rho.grid.spacing())
    throw std::invalid_argument("second_moment: radius b=" + format_double(b) + " is unresolved (need b >= 4h)");
  const Eigen::ArrayXd& r = rho.grid.radius();
  double sum = 0.0;
  for (Index i = 0; i < rho.grid.size(); ++i) {
    if (r[i] >= b) continue;
    sum += r[i] * r[i] * moment_cutoff(r[i], b) * rho.values[i];
  }
  return sum / static_cast<double>(rho.grid.size());
}

AnnularMass annular_mass(const Field& rho, double b) {
  const Eigen::ArrayXd& r = rho.grid.radius();
  AnnularMass out;
  double sum = 0.0;
  for (Index i = 0; i < rho.grid.size(); ++i) {
    if (rho.values[i] < 0.0) out.negative_values = true;
    if (r[i] >= b) sum += std::abs(rho.values[i]);
  }
  out.mass = sum / static_cast<double>(rho.grid.size());
  return out;
}

std::string_view to_string(CriticalityRegime r) {
  switch (r) {
    case CriticalityRegime::supercritical: return "supercritical";
    case CriticalityRegime::critical: return "critical";
    case CriticalityRegime::subcritical: return "subcritical";
  }
  return "critical";
}

CriticalityReport criticality_report(double a, double gamma, double p, int dim) {
  if (!(a >= 0.0)) throw std::invalid_argument("criticality_report: a must be >= 0");
  if (!(p >= 1.0)) throw std::invalid_argument("criticality_report: p must be >= 1");
  CriticalityReport rep;
  rep.gamma = gamma;
  rep.gamma_c = 2.0 + a;
  rep.lp_critical = 2.0 + a - dim * (1.0 - 1.0 / p);
  if (gamma < rep.gamma_c) rep.regime = CriticalityRegime::supercritical;
  else if (gamma > rep.gamma_c) rep.regime = CriticalityRegime::subcritical;
  else rep.regime = CriticalityRegime::critical;
  rep.in_analysed_range = gamma > 1.0;
  return rep;
}

DiagnosticsVector measure_state(const Field& rho, const SpectralField& rho_hat, double gamma, double moment_radius) {
  DiagnosticsVector d;
  d.mean = rho_hat.coeffs[0].real();
  d.min_val = rho.values.minCoeff();
  const Eigen::ArrayXd power = rho_hat.coeffs.abs2();
  const double fluct = power.sum() - power[0];
  d.l2_dist = std::sqrt(std::max(fluct, 0.0));
  d.hgamma2 = sobolev_norm(rho_hat, 0.5 * gamma, true);
  d.moment2 = second_moment(rho, moment_radius);
  d.annular_mass = annular_mass(rho, moment_radius).mass;
  const Eigen::ArrayXd& knorm = rho.grid.wavenumber_norm();
  const double cut = rho.grid.n() / 3.0;
  double tail = 0.0;
  for (Index i = 0; i < rho.grid.size(); ++i)
    if (knorm[i] > cut) tail += power[i];
  d.tail_frac = fluct > 0.0 ? tail / fluct : 0.0;
  return d;
}

}  // namespace aggflow
