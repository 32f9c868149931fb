#include "aggflow/flows.hpp"

#include "aggflow/field_io.hpp"
#include "aggflow/format.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace aggflow {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

void require_planar(const FlowSpec& spec, const Grid& grid) {
  if (grid.dim() != 2)
    throw std::invalid_argument("flow family '" + std::string(to_string(spec.family)) + "' requires dim = 2");
}
}  // namespace

std::string_view to_string(FlowFamily f) {
  switch (f) {
    case FlowFamily::zero: return "zero";
    case FlowFamily::shear: return "shear";
    case FlowFamily::translation: return "translation";
    case FlowFamily::time_changed_translation: return "time_changed_translation";
    case FlowFamily::custom_file: return "custom_file";
  }
  return "zero";
}

FlowFamily parse_flow_family(std::string_view s) {
  if (s == "zero") return FlowFamily::zero;
  if (s == "shear") return FlowFamily::shear;
  if (s == "translation") return FlowFamily::translation;
  if (s == "time_changed_translation") return FlowFamily::time_changed_translation;
  if (s == "custom_file") return FlowFamily::custom_file;
  throw std::invalid_argument("unknown flow family '" + std::string(s) + "'");
}

double TrigProfile::operator()(double s) const {
  double q = 1.0;
  for (size_t m = 0; m < amplitudes.size(); ++m) {
    const double phase = m < phases.size() ? phases[m] : 0.0;
    q += amplitudes[m] * std::cos(two_pi * static_cast<double>(m + 1) * s + phase);
  }
  return q;
}

double TrigProfile::lower_bound() const {
  double w = 0.0;
  for (double c : amplitudes) w += std::abs(c);
  return 1.0 - w;
}

double VelocityField::max_speed() const {
  if (is_zero()) return 0.0;
  Eigen::ArrayXd s2 = Eigen::ArrayXd::Zero(grid.size());
  for (const auto& c : components) s2 += c.values.square();
  return std::sqrt(s2.maxCoeff());
}

VelocityField build_flow(const FlowSpec& spec, const Grid& grid) {
  if (!(spec.amplitude >= 0.0)) throw std::invalid_argument("flow amplitude must be >= 0");
  VelocityField u(grid);
  switch (spec.family) {
    case FlowFamily::zero:
      return u;
    case FlowFamily::translation: {
      require_planar(spec, grid);
      u.components.push_back(Field::constant(grid, 1.0));
      u.components.push_back(Field::constant(grid, spec.slope));
      break;
    }
    case FlowFamily::shear: {
      require_planar(spec, grid);
      const Eigen::ArrayXd& y = grid.coordinate(1);
      Eigen::ArrayXd v = Eigen::ArrayXd::Zero(grid.size());
      for (size_t m = 0; m < spec.shear_sin.size(); ++m)
        v += spec.shear_sin[m] * (two_pi * static_cast<double>(m + 1) * y).sin();
      for (size_t m = 0; m < spec.shear_cos.size(); ++m)
        v += spec.shear_cos[m] * (two_pi * static_cast<double>(m + 1) * y).cos();
      u.components.emplace_back(grid, v);
      u.components.push_back(Field(grid));
      break;
    }
    case FlowFamily::time_changed_translation: {
      require_planar(spec, grid);
      if (spec.profile.lower_bound() < 1.0 - max_profile_weight - 1e-15)
        throw std::invalid_argument("time-change profile Q is not safely positive: sum |c_m| must be <= 0.9 (got " +
                                    format_double(1.0 - spec.profile.lower_bound()) + ")");
      const Eigen::ArrayXd& x = grid.coordinate(0);
      const Eigen::ArrayXd& y = grid.coordinate(1);
      Field ux(grid), uy(grid);
      for (Index i = 0; i < grid.size(); ++i) {
        ux.values[i] = spec.profile(y[i]);
        uy.values[i] = spec.slope * spec.profile(x[i]);
      }
      u.components.push_back(std::move(ux));
      u.components.push_back(std::move(uy));
      break;
    }
    case FlowFamily::custom_file: {
      auto comps = read_field_table(spec.file);
      if (static_cast<int>(comps.size()) != grid.dim())
        throw std::invalid_argument("custom flow file " + spec.file.string() + ": expected " +
                                    std::to_string(grid.dim()) + " components, got " + std::to_string(comps.size()));
      for (auto& c : comps) require_same_grid(grid, c.grid, "custom flow file");
      u.components = std::move(comps);
      const double defect = divergence_defect(u);
      if (defect > divergence_tolerance)
        throw std::invalid_argument("custom flow file " + spec.file.string() +
                                    " is not divergence-free: relative defect " + format_double(defect));
      break;
    }
  }
  for (auto& c : u.components) c.values *= spec.amplitude;
  return u;
}

double divergence_defect(const VelocityField& u) {
  if (u.is_zero()) return 0.0;
  std::vector<SpectralField> hats;
  double norm2 = 0.0;
  for (const auto& c : u.components) {
    hats.push_back(forward(c));
    norm2 += c.values.square().mean();
  }
  if (norm2 == 0.0) return 0.0;
  return l2_norm(divergence(hats)) / std::sqrt(norm2);
}

Field advect_term(const VelocityField& u, const Field& rho, double A) {
  require_same_grid(u.grid, rho.grid, "advect_term");
  if (u.is_zero() || A == 0.0) return Field(rho.grid);
  const auto grad = gradient(forward(rho));
  Eigen::ArrayXd product = Eigen::ArrayXd::Zero(rho.grid.size());
  for (int a = 0; a < rho.grid.dim(); ++a) product += u.components[a].values * inverse(grad[a]).values;
  SpectralField hat = forward(Field(rho.grid, A * product));
  dealias_in_place(rho.grid, hat.coeffs);
  return inverse(hat);
}

}  // namespace aggflow
