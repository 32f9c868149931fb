#include "aggflow/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>

namespace aggflow {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// The FFTW planner is not reentrant; execution of an existing plan on fresh
// arrays with the same alignment is. Plans are made once per (dim, n, sign)
// and never destroyed.
fftw_plan cached_plan(const Grid& g, int sign) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_tuple(g.dim(), g.n(), sign);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  int dims[3] = {g.n(), g.n(), g.n()};
  auto* in = fftw_alloc_complex(static_cast<size_t>(g.size()));
  auto* out = fftw_alloc_complex(static_cast<size_t>(g.size()));
  fftw_plan p = fftw_plan_dft(g.dim(), dims, in, out, sign, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  if (p == nullptr) throw std::runtime_error("FFTW plan creation failed");
  plans.emplace(key, p);
  return p;
}

}  // namespace

Field::Field(const Grid& g, Eigen::ArrayXd v) : grid(g), values(std::move(v)) {
  if (values.size() != g.size()) throw std::invalid_argument("Field: value count does not match grid");
}

SpectralField::SpectralField(const Grid& g, Eigen::ArrayXcd c) : grid(g), coeffs(std::move(c)) {
  if (coeffs.size() != g.size()) throw std::invalid_argument("SpectralField: coefficient count does not match grid");
}

std::string_view to_string(MultiplierConvention c) {
  return c == MultiplierConvention::paper_lambda ? "paper_lambda" : "laplacian_consistent";
}

MultiplierConvention parse_convention(std::string_view s) {
  if (s == "paper_lambda") return MultiplierConvention::paper_lambda;
  if (s == "laplacian_consistent") return MultiplierConvention::laplacian_consistent;
  throw std::invalid_argument("unknown multiplier convention '" + std::string(s) + "'");
}

TransformWorkspace::TransformWorkspace(const Grid& g) : grid_(g) {
  cached_plan(g, FFTW_FORWARD);
  cached_plan(g, FFTW_BACKWARD);
  in_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(static_cast<size_t>(g.size())));
  out_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(static_cast<size_t>(g.size())));
  if (in_ == nullptr || out_ == nullptr) throw std::bad_alloc();
}

TransformWorkspace::~TransformWorkspace() {
  fftw_free(in_);
  fftw_free(out_);
}

Eigen::Map<Eigen::ArrayXcd> TransformWorkspace::in() { return {in_, grid_.size()}; }
Eigen::Map<Eigen::ArrayXcd> TransformWorkspace::out() { return {out_, grid_.size()}; }

void TransformWorkspace::run(int sign) {
  fftw_execute_dft(cached_plan(grid_, sign), reinterpret_cast<fftw_complex*>(in_), reinterpret_cast<fftw_complex*>(out_));
}

void TransformWorkspace::forward(const Eigen::ArrayXd& values, Eigen::ArrayXcd& coeffs) {
  in() = values.cast<std::complex<double>>();
  run(FFTW_FORWARD);
  coeffs = out() * (grid_.node_phase() / static_cast<double>(grid_.size()));
}

void TransformWorkspace::inverse(const Eigen::ArrayXcd& coeffs, Eigen::ArrayXd& values) {
  in() = coeffs * grid_.node_phase();
  run(FFTW_BACKWARD);
  values = out().real();
}

void TransformWorkspace::forward_pair(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, Eigen::ArrayXcd& ca,
                                      Eigen::ArrayXcd& cb) {
  auto z = in();
  z.real() = a;
  z.imag() = b;
  run(FFTW_FORWARD);
  const auto& neg = grid_.negated_index();
  const auto& phase = grid_.node_phase();
  const double scale = 0.5 / static_cast<double>(grid_.size());
  ca.resize(grid_.size());
  cb.resize(grid_.size());
  for (Index i = 0; i < grid_.size(); ++i) {
    const std::complex<double> zk = out_[i];
    const std::complex<double> zm = out_[neg[i]];
    const double s = phase[i] * scale;
    // a = (z(k) + conj z(-k)) / 2, b = (z(k) - conj z(-k)) / 2i
    ca[i] = {(zk.real() + zm.real()) * s, (zk.imag() - zm.imag()) * s};
    cb[i] = {(zk.imag() + zm.imag()) * s, (zm.real() - zk.real()) * s};
  }
}

void TransformWorkspace::inverse_pair(const Eigen::ArrayXcd& ca, const Eigen::ArrayXcd& cb, Eigen::ArrayXd& a,
                                      Eigen::ArrayXd& b) {
  in() = (ca + std::complex<double>(0.0, 1.0) * cb) * grid_.node_phase();
  run(FFTW_BACKWARD);
  a = out().real();
  b = out().imag();
}

void forward_transform(const Grid& g, const Eigen::ArrayXd& values, Eigen::ArrayXcd& coeffs) {
  TransformWorkspace ws(g);
  ws.forward(values, coeffs);
}

void inverse_transform(const Grid& g, const Eigen::ArrayXcd& coeffs, Eigen::ArrayXd& values) {
  TransformWorkspace ws(g);
  ws.inverse(coeffs, values);
}

SpectralField forward(const Field& f) {
  SpectralField F(f.grid);
  forward_transform(f.grid, f.values, F.coeffs);
  return F;
}

Field inverse(const SpectralField& F) {
  Field f(F.grid);
  inverse_transform(F.grid, F.coeffs, f.values);
  return f;
}

double hermitian_defect(const SpectralField& F) {
  const Grid& g = F.grid;
  const auto& nyq = g.nyquist_mask();
  double worst = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    if (nyq[i] == 0.0) continue;
    auto idx = g.unravel(i);
    std::array<int, 3> k{0, 0, 0};
    for (int a = 0; a < g.dim(); ++a) k[a] = -g.wavenumber(idx[a]);
    worst = std::max(worst, std::abs(F.coeffs[g.mode_index(k)] - std::conj(F.coeffs[i])));
  }
  return worst;
}

Eigen::ArrayXd lambda_multiplier(const Grid& g, double sigma, MultiplierConvention conv) {
  const double scale = conv == MultiplierConvention::laplacian_consistent ? two_pi : 1.0;
  const Eigen::ArrayXd& knorm = g.wavenumber_norm();
  Eigen::ArrayXd m(g.size());
  for (Index i = 0; i < g.size(); ++i) m[i] = knorm[i] > 0.0 ? std::pow(scale * knorm[i], sigma) : 0.0;
  return m;
}

SpectralField apply_lambda(const SpectralField& F, double sigma, MultiplierConvention conv) {
  return SpectralField(F.grid, F.coeffs * lambda_multiplier(F.grid, sigma, conv));
}

Field apply_lambda(const Field& f, double sigma, MultiplierConvention conv) {
  return inverse(apply_lambda(forward(f), sigma, conv));
}

std::vector<SpectralField> gradient(const SpectralField& F) {
  const Grid& g = F.grid;
  std::vector<SpectralField> out;
  out.reserve(g.dim());
  const std::complex<double> i2pi(0.0, two_pi);
  for (int a = 0; a < g.dim(); ++a) {
    // The -n/2 mode has no conjugate partner; odd multipliers would make it complex.
    out.emplace_back(g, F.coeffs * (i2pi * (g.wavevector(a) * g.nyquist_mask()).cast<std::complex<double>>()));
  }
  return out;
}

SpectralField divergence(std::span<const SpectralField> V) {
  if (V.empty()) throw std::invalid_argument("divergence: empty vector field");
  const Grid& g = V.front().grid;
  if (static_cast<int>(V.size()) != g.dim()) throw std::invalid_argument("divergence: component count != dimension");
  SpectralField out(g);
  const std::complex<double> i2pi(0.0, two_pi);
  for (int a = 0; a < g.dim(); ++a) {
    require_same_grid(g, V[a].grid, "divergence");
    out.coeffs += V[a].coeffs * (i2pi * (g.wavevector(a) * g.nyquist_mask()).cast<std::complex<double>>());
  }
  return out;
}

void dealias_in_place(const Grid& g, Eigen::ArrayXcd& coeffs) { coeffs *= g.dealias_mask(); }

SpectralField dealias(const SpectralField& F) { return SpectralField(F.grid, F.coeffs * F.grid.dealias_mask()); }

double mean(const Field& f) { return f.values.mean(); }

double l2_norm(const Field& f) { return std::sqrt(f.values.square().mean()); }

double l2_norm(const SpectralField& F) { return std::sqrt(F.coeffs.abs2().sum()); }

double inner_product(const Field& f, const Field& g) {
  require_same_grid(f.grid, g.grid, "inner_product");
  return (f.values * g.values).mean();
}

double sobolev_norm(const SpectralField& F, double sigma, bool homogeneous) {
  const Eigen::ArrayXd& knorm = F.grid.wavenumber_norm();
  const Eigen::ArrayXd power = F.coeffs.abs2();
  double sum = 0.0;
  for (Index i = 0; i < F.grid.size(); ++i) {
    if (homogeneous) {
      if (knorm[i] > 0.0) sum += std::pow(knorm[i], 2.0 * sigma) * power[i];
    } else {
      sum += std::pow(1.0 + knorm[i] * knorm[i], sigma) * power[i];
    }
  }
  return std::sqrt(sum);
}

double sobolev_norm(const Field& f, double sigma, bool homogeneous) {
  return sobolev_norm(forward(f), sigma, homogeneous);
}

double homogeneous_vector_norm(std::span<const Field> v, double sigma) {
  double sum = 0.0;
  for (const auto& c : v) {
    const double s = sobolev_norm(c, sigma, true);
    sum += s * s;
  }
  return std::sqrt(sum);
}

bool all_finite(const Field& f) { return f.values.isFinite().all(); }

}  // namespace aggflow
