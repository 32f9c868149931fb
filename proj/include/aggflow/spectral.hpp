#pragma once

#include "aggflow/grid.hpp"

#include <Eigen/Core>

#include <span>
#include <string_view>
#include <vector>

namespace aggflow {

/// Real scalar sampled on every node of a grid.
struct Field {
  Grid grid;
  Eigen::ArrayXd values;

  explicit Field(const Grid& g) : grid(g), values(Eigen::ArrayXd::Zero(g.size())) {}
  Field(const Grid& g, Eigen::ArrayXd v);

  static Field constant(const Grid& g, double c) { return Field(g, Eigen::ArrayXd::Constant(g.size(), c)); }
};

/// Fourier coefficients with f(x) = sum_k fhat(k) exp(2 pi i k.x), one per lattice point.
struct SpectralField {
  Grid grid;
  Eigen::ArrayXcd coeffs;

  explicit SpectralField(const Grid& g) : grid(g), coeffs(Eigen::ArrayXcd::Zero(g.size())) {}
  SpectralField(const Grid& g, Eigen::ArrayXcd c);

  std::complex<double>& at(const std::array<int, 3>& k) { return coeffs[grid.mode_index(k)]; }
  std::complex<double> at(const std::array<int, 3>& k) const { return coeffs[grid.mode_index(k)]; }
};

using VectorFieldValues = std::vector<Field>;

enum class MultiplierConvention {
  paper_lambda,          ///< Lambda^s has multiplier |k|^s
  laplacian_consistent,  ///< Lambda^s has multiplier (2 pi |k|)^s, so Lambda^2 = -Laplacian
};

std::string_view to_string(MultiplierConvention c);
MultiplierConvention parse_convention(std::string_view s);

// Transforms

SpectralField forward(const Field& f);
Field inverse(const SpectralField& F);

/// Raw transforms on coefficient arrays in storage order (no allocation of Field wrappers).
void forward_transform(const Grid& g, const Eigen::ArrayXd& values, Eigen::ArrayXcd& coeffs);
void inverse_transform(const Grid& g, const Eigen::ArrayXcd& coeffs, Eigen::ArrayXd& values);

/// Reusable aligned transform buffers for one grid; not shareable between threads.
class TransformWorkspace {
 public:
  explicit TransformWorkspace(const Grid& g);
  TransformWorkspace(const TransformWorkspace&) = delete;
  TransformWorkspace& operator=(const TransformWorkspace&) = delete;
  ~TransformWorkspace();

  const Grid& grid() const { return grid_; }
  void forward(const Eigen::ArrayXd& values, Eigen::ArrayXcd& coeffs);
  void inverse(const Eigen::ArrayXcd& coeffs, Eigen::ArrayXd& values);

  /// Two real fields through one complex transform. Inputs of inverse_pair must be
  /// Hermitian (coefficients of real fields) or the halves leak into each other.
  void forward_pair(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, Eigen::ArrayXcd& ca, Eigen::ArrayXcd& cb);
  void inverse_pair(const Eigen::ArrayXcd& ca, const Eigen::ArrayXcd& cb, Eigen::ArrayXd& a, Eigen::ArrayXd& b);

 private:
  Eigen::Map<Eigen::ArrayXcd> in();
  Eigen::Map<Eigen::ArrayXcd> out();
  void run(int sign);

  Grid grid_;
  std::complex<double>* in_ = nullptr;
  std::complex<double>* out_ = nullptr;
};

/// max_k |F(-k) - conj F(k)|, skipping lattice points without a partner.
double hermitian_defect(const SpectralField& F);

// Fourier multipliers

/// Per-mode multiplier m(k)^sigma of Lambda^sigma; the k = 0 entry is 0.
Eigen::ArrayXd lambda_multiplier(const Grid& g, double sigma, MultiplierConvention conv);

SpectralField apply_lambda(const SpectralField& F, double sigma, MultiplierConvention conv);
Field apply_lambda(const Field& f, double sigma, MultiplierConvention conv);

std::vector<SpectralField> gradient(const SpectralField& F);
SpectralField divergence(std::span<const SpectralField> V);

/// Zero every coefficient with some |k_j| >= n/3.
SpectralField dealias(const SpectralField& F);
void dealias_in_place(const Grid& g, Eigen::ArrayXcd& coeffs);

// Norms (always in the |k|^s convention)

double mean(const Field& f);
double l2_norm(const Field& f);
double l2_norm(const SpectralField& F);
double inner_product(const Field& f, const Field& g);
double sobolev_norm(const Field& f, double sigma, bool homogeneous);
double sobolev_norm(const SpectralField& F, double sigma, bool homogeneous);
/// sqrt(sum_j ||Lambda^sigma v_j||^2) for a vector field.
double homogeneous_vector_norm(std::span<const Field> v, double sigma);

bool all_finite(const Field& f);

}  // namespace aggflow
