#pragma once

#include "aggflow/spectral.hpp"

#include <filesystem>
#include <numbers>
#include <string_view>
#include <vector>

namespace aggflow {

enum class FlowFamily { zero, shear, translation, time_changed_translation, custom_file };

std::string_view to_string(FlowFamily f);
FlowFamily parse_flow_family(std::string_view s);

/// Q(s) = 1 + sum_m c_m cos(2 pi m s + theta_m), m = 1, 2, ...
struct TrigProfile {
  std::vector<double> amplitudes;
  std::vector<double> phases;

  double operator()(double s) const;
  /// Guaranteed lower bound 1 - sum |c_m|.
  double lower_bound() const;
};

struct FlowSpec {
  FlowFamily family = FlowFamily::zero;
  double amplitude = 1.0;
  /// Slope alpha of the translation direction (1, alpha).
  double slope = std::numbers::phi - 1.0;
  /// Speed profile of the time-changed translation.
  TrigProfile profile;
  /// Shear profile v(y) = sum_m s_m sin(2 pi m y) + c_m cos(2 pi m y).
  std::vector<double> shear_sin{1.0};
  std::vector<double> shear_cos;
  std::filesystem::path file;
};

/// Sampled steady velocity; an empty component list means u = 0.
struct VelocityField {
  Grid grid;
  std::vector<Field> components;

  explicit VelocityField(const Grid& g) : grid(g) {}
  bool is_zero() const { return components.empty(); }
  double max_speed() const;
};

/// Largest admissible sum of |c_m| in a time-change profile (keeps Q >= 1/10).
inline constexpr double max_profile_weight = 0.9;
/// Relative divergence tolerance for accepted velocity fields.
inline constexpr double divergence_tolerance = 1e-10;

/// Sample a flow family on the grid, scaled by spec.amplitude.
///
/// time_changed_translation is u(x, y) = (Q(y), alpha Q(x)): both components
/// are positive, the field is exactly divergence-free and periodic, and in the
/// coordinates (G(x), G(y)) with G' = Q its orbits are the lines of slope
/// alpha traversed at speed Q(x) Q(y). Q = 1 gives the translation (1, alpha).
VelocityField build_flow(const FlowSpec& spec, const Grid& grid);

/// ||div u||_{L2} / ||u||_{L2} (0 for u = 0).
double divergence_defect(const VelocityField& u);

/// A u . grad rho, pseudo-spectral with 2/3 dealiasing of the product.
Field advect_term(const VelocityField& u, const Field& rho, double A);

}  // namespace aggflow
