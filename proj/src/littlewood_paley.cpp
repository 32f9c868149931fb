#include "aggflow/littlewood_paley.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aggflow {

namespace {

double bump_tail(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

constexpr double transition_width = LPBump::support - LPBump::plateau;

}  // namespace

double smooth_step_down(double s) {
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  const double a = bump_tail(1.0 - s);
  const double b = bump_tail(s);
  return a / (a + b);
}

double smooth_step_down_derivative(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  const double a = bump_tail(1.0 - s);
  const double b = bump_tail(s);
  const double denom = (a + b) * (a + b);
  return -a * b * (1.0 / ((1.0 - s) * (1.0 - s)) + 1.0 / (s * s)) / denom;
}

LPBump::LPBump() {
  // phi0'(r) and phi0'(2r) have disjoint supports, so sup|grad phi| = 2 sup|phi0'|.
  double worst = 0.0;
  constexpr int samples = 20000;
  for (int i = 1; i < samples; ++i) {
    worst = std::max(worst, std::abs(smooth_step_down_derivative(static_cast<double>(i) / samples)));
  }
  grad_sup_ = 2.0 * worst / transition_width;
}

double LPBump::phi0(double r) const { return smooth_step_down((r - plateau) / transition_width); }

double LPBump::level_weight(int k, double r) const {
  if (k < -1) throw std::invalid_argument("Littlewood-Paley level must be >= -1");
  if (k == -1) return phi0(2.0 * r);
  return phi(std::ldexp(r, -k));
}

int lp_max_level(const Grid& g) {
  const double kmax = std::sqrt(static_cast<double>(g.dim())) * (g.n() / 2);
  return static_cast<int>(std::ceil(std::log2(kmax)));
}

SpectralField lp_project(const SpectralField& F, int k, const LPBump& bump) {
  if (k < -1) throw std::invalid_argument("lp_project: level must be >= -1");
  const Eigen::ArrayXd& knorm = F.grid.wavenumber_norm();
  SpectralField out(F.grid);
  for (Index i = 0; i < F.grid.size(); ++i) {
    const double w = bump.level_weight(k, knorm[i]);
    if (w != 0.0) out.coeffs[i] = w * F.coeffs[i];
  }
  return out;
}

Field lp_project(const Field& f, int k, const LPBump& bump) { return inverse(lp_project(forward(f), k, bump)); }

NormPair lp_norm_equivalence(const Field& f, double sigma, const LPBump& bump) {
  const SpectralField F = forward(f);
  NormPair out;
  const double h = sobolev_norm(F, sigma, true);
  out.lhs = h * h;
  const int top = lp_max_level(f.grid);
  for (int k = 0; k <= top; ++k) {
    const double s = l2_norm(lp_project(F, k, bump));
    out.rhs += std::pow(2.0, 2.0 * sigma * k) * s * s;
  }
  return out;
}

NormPair lp_equivalence_bracket(double sigma, const LPBump& bump, double r_max) {
  // log-spaced radial scan; the ratio is a smooth function of log r
  const int samples = 200000;
  const double log_max = std::log(r_max);
  NormPair bracket{1e300, 0.0};
  for (int i = 0; i <= samples; ++i) {
    const double r = std::exp(log_max * i / samples);
    double w = 0.0;
    for (int k = 0; std::ldexp(1.0, k - 1) <= r * 1.1; ++k) {
      const double p = bump.level_weight(k, r);
      w += std::pow(2.0, 2.0 * sigma * k) * p * p;
    }
    const double ratio = std::pow(r, 2.0 * sigma) / w;
    bracket.lhs = std::min(bracket.lhs, ratio);
    bracket.rhs = std::max(bracket.rhs, ratio);
  }
  return bracket;
}

int spectral_bandwidth(const SpectralField& F, double rel_tol) {
  const Eigen::ArrayXd mag = F.coeffs.abs();
  const double cut = rel_tol * mag.maxCoeff();
  int band = 0;
  for (Index i = 0; i < F.grid.size(); ++i) {
    if (mag[i] <= cut) continue;
    for (int a = 0; a < F.grid.dim(); ++a) band = std::max(band, static_cast<int>(std::abs(F.grid.wavevector(a)[i])));
  }
  return band;
}

CommutatorResult commutator_check(const Field& g, const Field& f, int k, const LPBump& bump) {
  require_same_grid(g.grid, f.grid, "commutator_check");
  if (k < 0) throw std::invalid_argument("commutator_check: level must be >= 0");
  const SpectralField G = forward(g);
  const SpectralField Fh = forward(f);
  CommutatorResult out;
  out.aliased = spectral_bandwidth(G) + spectral_bandwidth(Fh) >= g.grid.n() / 2;

  const Field product(g.grid, g.values * f.values);
  const Field projected_product = lp_project(product, k, bump);
  const Field projected_f = lp_project(f, k, bump);
  const Field commutator(g.grid, projected_product.values - g.values * projected_f.values);
  out.lhs = l2_norm(commutator);

  const double weighted_l1 = (G.coeffs.abs() * g.grid.wavenumber_norm()).sum();
  out.rhs = std::ldexp(1.0, -k) * bump.grad_phi_sup() * weighted_l1 * l2_norm(f);
  return out;
}

}  // namespace aggflow
