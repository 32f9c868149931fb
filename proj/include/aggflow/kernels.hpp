#pragma once

#include "aggflow/spectral.hpp"

#include <filesystem>
#include <string_view>
#include <vector>

namespace aggflow {

enum class KernelKind { none, power, keller_segel };

std::string_view to_string(KernelKind k);
KernelKind parse_kernel_kind(std::string_view s);

/// Spectral representation of the interaction kernel gradient, one
/// SpectralField per spatial component. Immutable once built.
struct KernelSpec {
  Grid grid;
  KernelKind kind = KernelKind::none;
  double a = 0.0;    ///< singularity exponent: grad K = x/|x|^{2+a} near 0
  double eps = 0.0;  ///< core radius
  /// Supremum of admissible integrability exponents: grad K lies in L^p iff p < d/(1+a).
  double p0_max = 0.0;
  std::vector<SpectralField> components;

  explicit KernelSpec(const Grid& g) : grid(g) {}
  bool is_null() const { return kind == KernelKind::none; }
};

/// grad K = x/|x|^{2+a} on B_eps, smoothly cut to zero beyond 2 eps, zero at the origin node.
KernelSpec build_power_kernel(const Grid& grid, double a, double eps);
/// grad Delta^{-1}: component j has multiplier -i k_j / (2 pi |k|^2), zero at k = 0.
KernelSpec build_ks_kernel(const Grid& grid);
/// No interaction at all.
KernelSpec null_kernel(const Grid& grid);

/// Real-space profile of the power kernel's radial cutoff (1 on [0, eps], 0 beyond 2 eps).
double power_kernel_cutoff(double r, double eps);

/// Periodic convolution grad K * rho, component by component.
std::vector<Field> apply_kernel(const KernelSpec& ks, const Field& rho);
std::vector<SpectralField> apply_kernel(const KernelSpec& ks, const SpectralField& rho_hat);

/// Real-space samples of the kernel components (inverse transforms).
std::vector<Field> kernel_samples(const KernelSpec& ks);

/// Text coefficient table: header (kind, a, eps, dim, n) then "re im" per lattice point per component.
void save_kernel(const KernelSpec& ks, const std::filesystem::path& path);
KernelSpec load_kernel(const std::filesystem::path& path);

}  // namespace aggflow
