#include "aggflow/grid.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <utility>

namespace aggflow {

namespace detail {

struct GridTables {
  std::array<Eigen::ArrayXd, 3> coordinate;
  std::array<Eigen::ArrayXd, 3> wavevector;
  Eigen::ArrayXd knorm;
  Eigen::ArrayXd radius;
  Eigen::ArrayXd phase;
  Eigen::ArrayXd dealias;
  Eigen::ArrayXd nyquist;
  Eigen::Array<Index, Eigen::Dynamic, 1> negated;
};

namespace {

std::shared_ptr<const GridTables> build_tables(const Grid& g) {
  auto t = std::make_shared<GridTables>();
  const Index size = g.size();
  for (int a = 0; a < 3; ++a) {
    t->coordinate[a] = Eigen::ArrayXd::Zero(a < g.dim() ? size : 0);
    t->wavevector[a] = Eigen::ArrayXd::Zero(a < g.dim() ? size : 0);
  }
  t->knorm.resize(size);
  t->radius.resize(size);
  t->phase.resize(size);
  t->dealias.resize(size);
  t->nyquist.resize(size);
  t->negated.resize(size);
  const int n = g.n();
  for (Index i = 0; i < size; ++i) {
    const auto idx = g.unravel(i);
    double k2 = 0.0, x2 = 0.0;
    int ksum = 0;
    bool keep = true, nyq = false;
    for (int a = 0; a < g.dim(); ++a) {
      const int k = g.wavenumber(idx[a]);
      const double x = g.node(idx[a]);
      t->coordinate[a][i] = x;
      t->wavevector[a][i] = k;
      k2 += static_cast<double>(k) * k;
      x2 += x * x;
      ksum += k;
      if (3 * std::abs(k) >= n) keep = false;
      if (k == -n / 2) nyq = true;
    }
    t->knorm[i] = std::sqrt(k2);
    t->radius[i] = std::sqrt(x2);
    t->phase[i] = (ksum % 2 == 0) ? 1.0 : -1.0;
    t->dealias[i] = keep ? 1.0 : 0.0;
    t->nyquist[i] = nyq ? 0.0 : 1.0;
    std::array<int, 3> neg{0, 0, 0};
    for (int a = 0; a < g.dim(); ++a) neg[a] = (n - idx[a]) % n;
    t->negated[i] = g.ravel(neg);
  }
  return t;
}

std::shared_ptr<const GridTables> shared_tables(const Grid& g) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::weak_ptr<const GridTables>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{g.dim(), g.n()}];
  if (auto existing = slot.lock()) return existing;
  auto fresh = build_tables(g);
  slot = fresh;
  return fresh;
}

}  // namespace
}  // namespace detail

Grid::Grid(int dim, int n) : dim_(dim), n_(n) {
  if (dim < 1 || dim > 3)
    throw std::invalid_argument("grid dimension must be 1, 2 or 3 (got " + std::to_string(dim) + ")");
  if (n < 8) throw std::invalid_argument("grid resolution must be at least 8 (got " + std::to_string(n) + ")");
  if (n % 2 != 0) throw std::invalid_argument("grid resolution must be even (got odd resolution " + std::to_string(n) + ")");
  size_ = 1;
  for (int a = 0; a < dim; ++a) size_ *= n;
  tables_ = detail::shared_tables(*this);
}

std::array<int, 3> Grid::unravel(Index i) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = dim_ - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(i % n_);
    i /= n_;
  }
  return idx;
}

Index Grid::ravel(const std::array<int, 3>& idx) const {
  Index i = 0;
  for (int a = 0; a < dim_; ++a) i = i * n_ + idx[a];
  return i;
}

Index Grid::mode_index(const std::array<int, 3>& k) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = 0; a < dim_; ++a) idx[a] = wavenumber_index(k[a]);
  return ravel(idx);
}

const Eigen::ArrayXd& Grid::coordinate(int axis) const { return tables_->coordinate.at(axis); }
const Eigen::ArrayXd& Grid::wavevector(int axis) const { return tables_->wavevector.at(axis); }
const Eigen::ArrayXd& Grid::wavenumber_norm() const { return tables_->knorm; }
const Eigen::ArrayXd& Grid::radius() const { return tables_->radius; }
const Eigen::ArrayXd& Grid::node_phase() const { return tables_->phase; }
const Eigen::ArrayXd& Grid::dealias_mask() const { return tables_->dealias; }
const Eigen::ArrayXd& Grid::nyquist_mask() const { return tables_->nyquist; }
const Eigen::Array<Index, Eigen::Dynamic, 1>& Grid::negated_index() const { return tables_->negated; }

Grid make_grid(int dim, int n) { return Grid(dim, n); }

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (a != b) {
    throw GridMismatch(std::string(what) + ": grid mismatch (" + std::to_string(a.dim()) + "d n=" +
                       std::to_string(a.n()) + " vs " + std::to_string(b.dim()) + "d n=" + std::to_string(b.n()) +
                       ")");
  }
}

}  // namespace aggflow
