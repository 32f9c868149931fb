#include "aggflow/kernels.hpp"

#include "aggflow/format.hpp"
#include "aggflow/littlewood_paley.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace aggflow {

std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::none: return "none";
    case KernelKind::power: return "power";
    case KernelKind::keller_segel: return "keller_segel";
  }
  return "none";
}

KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "none") return KernelKind::none;
  if (s == "power") return KernelKind::power;
  if (s == "keller_segel") return KernelKind::keller_segel;
  throw std::invalid_argument("unknown kernel kind '" + std::string(s) + "'");
}

double power_kernel_cutoff(double r, double eps) { return smooth_step_down((r - eps) / eps); }

KernelSpec build_power_kernel(const Grid& grid, double a, double eps) {
  const int d = grid.dim();
  if (!(a >= 0.0)) throw std::invalid_argument("power kernel: exponent a must be >= 0");
  if (!(d / (1.0 + a) > 1.0))
    throw std::invalid_argument("power kernel: inadmissible (a, d): need d/(1+a) > 1, got d=" + std::to_string(d) +
                                ", a=" + format_double(a));
  if (!(eps > 0.0 && eps <= 0.25)) throw std::invalid_argument("power kernel: eps must lie in (0, 1/4]");
  if (eps < 4.0 * grid.spacing())
    throw std::invalid_argument("power kernel: eps=" + format_double(eps) + " is unresolved (need eps >= 4/n)");

  KernelSpec ks(grid);
  ks.kind = KernelKind::power;
  ks.a = a;
  ks.eps = eps;
  ks.p0_max = d / (1.0 + a);

  const Eigen::ArrayXd& r = grid.radius();
  Eigen::ArrayXd slope(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    slope[i] = r[i] > 0.0 ? power_kernel_cutoff(r[i], eps) / std::pow(r[i], 2.0 + a) : 0.0;
  }
  for (int axis = 0; axis < d; ++axis) {
    Field component(grid, grid.coordinate(axis) * slope);
    SpectralField hat = forward(component);
    // odd sampling sums to zero up to rounding; make it exact
    hat.coeffs[0] = 0.0;
    ks.components.push_back(std::move(hat));
  }
  return ks;
}

KernelSpec build_ks_kernel(const Grid& grid) {
  KernelSpec ks(grid);
  ks.kind = KernelKind::keller_segel;
  ks.a = grid.dim() - 2.0;
  ks.p0_max = grid.dim() / (1.0 + std::max(ks.a, 0.0));
  const Eigen::ArrayXd& knorm = grid.wavenumber_norm();
  for (int axis = 0; axis < grid.dim(); ++axis) {
    SpectralField hat(grid);
    const Eigen::ArrayXd& k = grid.wavevector(axis);
    const Eigen::ArrayXd& nyq = grid.nyquist_mask();
    for (Index i = 0; i < grid.size(); ++i) {
      if (knorm[i] == 0.0) continue;
      hat.coeffs[i] = std::complex<double>(0.0, -k[i] * nyq[i] / (2.0 * std::numbers::pi * knorm[i] * knorm[i]));
    }
    ks.components.push_back(std::move(hat));
  }
  return ks;
}

KernelSpec null_kernel(const Grid& grid) { return KernelSpec(grid); }

std::vector<SpectralField> apply_kernel(const KernelSpec& ks, const SpectralField& rho_hat) {
  require_same_grid(ks.grid, rho_hat.grid, "apply_kernel");
  std::vector<SpectralField> out;
  out.reserve(ks.grid.dim());
  for (int axis = 0; axis < ks.grid.dim(); ++axis) {
    if (ks.is_null()) {
      out.emplace_back(ks.grid);
    } else {
      out.emplace_back(ks.grid, ks.components[axis].coeffs * rho_hat.coeffs);
    }
  }
  return out;
}

std::vector<Field> apply_kernel(const KernelSpec& ks, const Field& rho) {
  std::vector<Field> out;
  for (const auto& c : apply_kernel(ks, forward(rho))) out.push_back(inverse(c));
  return out;
}

std::vector<Field> kernel_samples(const KernelSpec& ks) {
  std::vector<Field> out;
  for (int axis = 0; axis < ks.grid.dim(); ++axis)
    out.push_back(ks.is_null() ? Field(ks.grid) : inverse(ks.components[axis]));
  return out;
}

void save_kernel(const KernelSpec& ks, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open kernel file for writing: " + path.string());
  out << "# aggflow kernel table v1\n";
  out << "kind " << to_string(ks.kind) << "\n";
  out << "a " << format_double(ks.a) << "\n";
  out << "eps " << format_double(ks.eps) << "\n";
  out << "dim " << ks.grid.dim() << "\n";
  out << "n " << ks.grid.n() << "\n";
  for (const auto& c : ks.components) {
    for (Index i = 0; i < ks.grid.size(); ++i)
      out << format_double(c.coeffs[i].real()) << ' ' << format_double(c.coeffs[i].imag()) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing kernel file: " + path.string());
}

KernelSpec load_kernel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open kernel file: " + path.string());
  std::string line;
  std::string kind;
  double a = 0.0, eps = 0.0;
  int dim = 0, n = 0;
  int header_fields = 0;
  while (header_fields < 5 && std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    if (key == "kind") kind = value;
    else if (key == "a") a = parse_double(value, "kernel a");
    else if (key == "eps") eps = parse_double(value, "kernel eps");
    else if (key == "dim") dim = static_cast<int>(parse_integer(value, "kernel dim"));
    else if (key == "n") n = static_cast<int>(parse_integer(value, "kernel n"));
    else throw std::runtime_error("kernel file: unexpected header key '" + key + "'");
    ++header_fields;
  }
  if (header_fields != 5) throw std::runtime_error("kernel file: incomplete header in " + path.string());
  Grid grid(dim, n);
  KernelSpec ks(grid);
  ks.kind = parse_kernel_kind(kind);
  ks.a = a;
  ks.eps = eps;
  ks.p0_max = dim / (1.0 + std::max(a, 0.0));
  if (ks.is_null()) return ks;
  for (int axis = 0; axis < dim; ++axis) {
    SpectralField c(grid);
    for (Index i = 0; i < grid.size(); ++i) {
      std::string re, im;
      if (!(in >> re >> im)) throw std::runtime_error("kernel file: truncated coefficient table");
      c.coeffs[i] = {parse_double(re, "kernel coefficient"), parse_double(im, "kernel coefficient")};
    }
    ks.components.push_back(std::move(c));
  }
  return ks;
}

}  // namespace aggflow
