#pragma once

#include "aggflow/spectral.hpp"

namespace aggflow {

/// C-infinity transition from 1 (s <= 0) to 0 (s >= 1).
double smooth_step_down(double s);
/// Derivative of smooth_step_down.
double smooth_step_down_derivative(double s);

/// Radial Littlewood-Paley bump.
///
/// phi0(r) = 1 on r <= 1, 0 on r >= 11/10, smooth in between;
/// phi(r) = phi0(r) - phi0(2r) is the dyadic annulus profile, so that
/// phi0(2r) + sum_{k>=0} phi(2^-k r) = 1 for every r.
class LPBump {
 public:
  static constexpr double plateau = 1.0;
  static constexpr double support = 1.1;

  LPBump();

  double phi0(double r) const;
  double phi(double r) const { return phi0(r) - phi0(2.0 * r); }
  /// Weight of level k (k >= -1) at frequency radius r.
  double level_weight(int k, double r) const;
  /// sup |grad phi|, taken over the radial profile.
  double grad_phi_sup() const { return grad_sup_; }

 private:
  double grad_sup_;
};

/// Highest level whose annulus meets the lattice of the grid.
int lp_max_level(const Grid& g);

SpectralField lp_project(const SpectralField& F, int k, const LPBump& bump = LPBump());
Field lp_project(const Field& f, int k, const LPBump& bump = LPBump());

struct NormPair {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs = ||f||^2 in homogeneous H^sigma, rhs = sum_{k>=0} 2^{2 sigma k} ||S_k f||^2.
NormPair lp_norm_equivalence(const Field& f, double sigma, const LPBump& bump = LPBump());

/// min and max over r >= 1 of r^{2 sigma} / sum_k 2^{2 sigma k} phi(2^-k r)^2,
/// i.e. the sharp bracket of lhs/rhs over all fields.
NormPair lp_equivalence_bracket(double sigma, const LPBump& bump = LPBump(), double r_max = 4096.0);

struct CommutatorResult {
  double lhs = 0.0;  ///< ||S_k(g f) - g S_k f||_{L2}
  double rhs = 0.0;  ///< 2^-k ||grad phi||_inf sum_beta |ghat(beta)||beta| ||f||_{L2}
  bool aliased = false;  ///< product bandwidth exceeds what the grid represents exactly
};

CommutatorResult commutator_check(const Field& g, const Field& f, int k, const LPBump& bump = LPBump());

/// max_j |k_j| over modes with |coefficient| > tol * max |coefficient|.
int spectral_bandwidth(const SpectralField& F, double rel_tol = 1e-14);

}  // namespace aggflow
