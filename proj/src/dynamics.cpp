#include "aggflow/dynamics.hpp"

#include "aggflow/format.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace aggflow {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
// dt is snapped down to dt_init * 2^{-m / ladder_steps} so integrator weights can be reused
constexpr int ladder_steps = 8;

// N(rho_hat) = -div(rho (A u - grad K * rho)), products formed on the grid and dealiased.
// Real fields travel in pairs through one complex transform.
class DriftOperator {
 public:
  struct Stats {
    double max_speed = 0.0;
    double min_value = 0.0;
    double max_value = 0.0;
  };

  DriftOperator(const Grid& g, const VelocityField& u, double A, const KernelSpec& ks)
      : grid_(g), ws_(g), rho_(g.size()) {
    require_same_grid(g, u.grid, "drift operator (velocity)");
    require_same_grid(g, ks.grid, "drift operator (kernel)");
    active_flow_ = !u.is_zero() && A != 0.0;
    active_kernel_ = !ks.is_null();
    for (int a = 0; a < g.dim(); ++a) {
      advecting_.push_back(active_flow_ ? Eigen::ArrayXd(A * u.components[a].values) : Eigen::ArrayXd::Zero(g.size()));
      div_mult_.push_back(-two_pi * g.wavevector(a) * g.nyquist_mask() * g.dealias_mask());
      // unpaired modes would break the Hermitian symmetry the paired transforms rely on
      if (active_kernel_) kernel_.push_back(ks.components[a].coeffs * g.nyquist_mask());
      velocity_.emplace_back(g.size());
      flux_.emplace_back(g.size());
      flux_hat_.emplace_back(g.size());
      drift_hat_.emplace_back(g.size());
    }
  }

  Stats evaluate(const Eigen::ArrayXcd& state, Eigen::ArrayXcd& out) {
    Stats st;
    ws_.inverse(state, rho_);
    st.min_value = rho_.minCoeff();
    st.max_value = rho_.maxCoeff();
    const Index size = grid_.size();
    out.resize(size);
    if (!active_flow_ && !active_kernel_) {
      out.setZero();
      return st;
    }
    const int d = grid_.dim();
    if (active_kernel_) {
      for (int a = 0; a < d; ++a) drift_hat_[a] = kernel_[a] * state;
      for (int a = 0; a < d; a += 2) {
        if (a + 1 < d) ws_.inverse_pair(drift_hat_[a], drift_hat_[a + 1], velocity_[a], velocity_[a + 1]);
        else ws_.inverse(drift_hat_[a], velocity_[a]);
      }
    }
    if (!active_kernel_)
      for (int a = 0; a < d; ++a) velocity_[a].setZero();
    double speed2 = 0.0;
    if (d == 2) {
      const double *ax = advecting_[0].data(), *ay = advecting_[1].data();
      const double *kx = velocity_[0].data(), *ky = velocity_[1].data(), *r = rho_.data();
      double *fx = flux_[0].data(), *fy = flux_[1].data();
      for (Index i = 0; i < size; ++i) {
        const double vx = ax[i] - kx[i], vy = ay[i] - ky[i];
        speed2 = std::max(speed2, vx * vx + vy * vy);
        fx[i] = r[i] * vx;
        fy[i] = r[i] * vy;
      }
    } else {
      for (Index i = 0; i < size; ++i) {
        double s2 = 0.0;
        for (int a = 0; a < d; ++a) {
          const double v = advecting_[a][i] - velocity_[a][i];
          s2 += v * v;
          flux_[a][i] = rho_[i] * v;
        }
        speed2 = std::max(speed2, s2);
      }
    }
    st.max_speed = std::sqrt(speed2);
    for (int a = 0; a < d; a += 2) {
      if (a + 1 < d) ws_.forward_pair(flux_[a], flux_[a + 1], flux_hat_[a], flux_hat_[a + 1]);
      else ws_.forward(flux_[a], flux_hat_[a]);
    }
    // -div F has coefficients i m_a(k) F_a(k) with m_a = -2 pi k_a (masked)
    auto* o = reinterpret_cast<double*>(out.data());
    for (int a = 0; a < d; ++a) {
      const double* m = div_mult_[a].data();
      const auto* f = reinterpret_cast<const double*>(flux_hat_[a].data());
      if (a == 0) {
        for (Index i = 0; i < size; ++i) {
          o[2 * i] = -m[i] * f[2 * i + 1];
          o[2 * i + 1] = m[i] * f[2 * i];
        }
      } else {
        for (Index i = 0; i < size; ++i) {
          o[2 * i] -= m[i] * f[2 * i + 1];
          o[2 * i + 1] += m[i] * f[2 * i];
        }
      }
    }
    return st;
  }

 private:
  Grid grid_;
  TransformWorkspace ws_;
  bool active_flow_ = false;
  bool active_kernel_ = false;
  std::vector<Eigen::ArrayXd> advecting_;
  std::vector<Eigen::ArrayXd> div_mult_;
  std::vector<Eigen::ArrayXcd> kernel_;
  std::vector<Eigen::ArrayXd> velocity_, flux_;
  std::vector<Eigen::ArrayXcd> flux_hat_, drift_hat_;
  Eigen::ArrayXd rho_;
};

// Exponential time differencing with the diagonal linear part -rates handled exactly.
class ExponentialStepper {
 public:
  ExponentialStepper(Eigen::ArrayXd rates, Integrator integrator)
      : rates_(std::move(rates)), integrator_(integrator) {}

  /// Advance `state` by dt; `n0` must hold N(state) on entry.
  void advance(Eigen::ArrayXcd& state, double dt, const Eigen::ArrayXcd& n0, DriftOperator& op) {
    const Weights& w = weights(dt);
    if (integrator_ == Integrator::etd2) {
      a_ = w.e * state + w.phi1 * n0;
      op.evaluate(a_, na_);
      state = a_ + w.phi2 * (na_ - n0);
      return;
    }
    a_ = w.e_half * state + w.q * n0;
    op.evaluate(a_, na_);
    b_ = w.e_half * state + w.q * na_;
    op.evaluate(b_, nb_);
    c_ = w.e_half * a_ + w.q * (2.0 * nb_ - n0);
    op.evaluate(c_, nc_);
    state = w.e * state + w.f1 * n0 + w.f2 * (na_ + nb_) + w.f3 * nc_;
  }

 private:
  struct Weights {
    Eigen::ArrayXd e, e_half, phi1, phi2, q, f1, f2, f3;
  };

  const Weights& weights(double dt) {
    if (auto it = cache_.find(dt); it != cache_.end()) return it->second;
    if (cache_.size() > 64) cache_.clear();
    const Index size = rates_.size();
    Weights w;
    w.e.resize(size);
    if (integrator_ == Integrator::etd2) {
      w.phi1.resize(size);
      w.phi2.resize(size);
    } else {
      w.e_half.resize(size);
      w.q.resize(size);
      w.f1.resize(size);
      w.f2.resize(size);
      w.f3.resize(size);
    }
    for (Index i = 0; i < size; ++i) {
      const double z = -rates_[i] * dt;
      w.e[i] = std::exp(z);
      if (integrator_ == Integrator::etd2) {
        w.phi1[i] = dt * phi_function(1, z);
        w.phi2[i] = dt * phi_function(2, z);
      } else {
        const double p1 = phi_function(1, z), p2 = phi_function(2, z), p3 = phi_function(3, z);
        w.e_half[i] = std::exp(0.5 * z);
        w.q[i] = 0.5 * dt * phi_function(1, 0.5 * z);
        w.f1[i] = dt * (p1 - 3.0 * p2 + 4.0 * p3);
        w.f2[i] = 2.0 * dt * (p2 - 2.0 * p3);
        w.f3[i] = dt * (4.0 * p3 - p2);
      }
    }
    return cache_.emplace(dt, std::move(w)).first->second;
  }

  Eigen::ArrayXd rates_;
  Integrator integrator_;
  std::map<double, Weights> cache_;
  Eigen::ArrayXcd a_, b_, c_, na_, nb_, nc_;
};

double fluctuation_l2(const Eigen::ArrayXcd& state) { return std::sqrt(std::max(state.abs2().sum() - std::norm(state[0]), 0.0)); }

enum class Mode { nonlinear, linear, transport };

double moment_quadrature_radius_ok(const Grid& g, double b) { return b > 0.0 && b < 0.125 && b >= 4.0 * g.spacing(); }

DiagnosticsVector sample(const Eigen::ArrayXcd& state, const Grid& g, TransformWorkspace& ws, const SolverConfig& cfg,
                         bool moment_ok) {
  Field rho(g);
  ws.inverse(state, rho.values);
  const SpectralField hat(g, state);
  if (moment_ok) return measure_state(rho, hat, cfg.gamma, cfg.moment_radius);
  // the moment cut-off is not resolved on this grid; report the rest
  DiagnosticsVector d;
  const Eigen::ArrayXd power = state.abs2();
  d.mean = state[0].real();
  d.min_val = rho.values.minCoeff();
  d.l2_dist = fluctuation_l2(state);
  d.hgamma2 = sobolev_norm(hat, 0.5 * cfg.gamma, true);
  d.moment2 = std::numeric_limits<double>::quiet_NaN();
  d.annular_mass = annular_mass(rho, cfg.moment_radius).mass;
  const Eigen::ArrayXd& knorm = g.wavenumber_norm();
  double tail = 0.0;
  for (Index i = 0; i < g.size(); ++i)
    if (knorm[i] > g.n() / 3.0) tail += power[i];
  const double fluct = d.l2_dist * d.l2_dist;
  d.tail_frac = fluct > 0.0 ? tail / fluct : 0.0;
  return d;
}

RunRecord integrate(Mode mode, const Field& initial, const VelocityField& u, double A, const KernelSpec& ks,
                    const SolverConfig& cfg, const RunOptions& opts) {
  RunRecord rec;
  rec.config = cfg;
  rec.flags = validate(cfg);
  const Grid& g = initial.grid;
  require_same_grid(g, u.grid, "run (velocity)");
  require_same_grid(g, ks.grid, "run (kernel)");
  if (!all_finite(initial)) throw std::invalid_argument("initial data contains non-finite values");

  Eigen::ArrayXd rates;
  if (mode == Mode::transport) {
    const Eigen::ArrayXd eta = g.wavenumber_norm() / (g.n() / 3.0);
    rates = cfg.filter_rate * eta.pow(cfg.filter_order);
  } else {
    rates = dissipation_rates(g, cfg);
  }

  DriftOperator op(g, u, A, ks);
  ExponentialStepper stepper(rates, cfg.integrator);
  TransformWorkspace ws(g);
  const bool moment_ok = moment_quadrature_radius_ok(g, cfg.moment_radius);
  if (!moment_ok) rec.flags.push_back("moment_radius_unresolved");

  Eigen::ArrayXcd state;
  ws.forward(initial.values, state);
  if (mode == Mode::linear) state[0] = 0.0;
  const std::complex<double> mean0 = state[0];
  const double initial_norm = std::sqrt(state.abs2().sum());

  rec.initial_max = initial.values.maxCoeff();
  rec.min_value = initial.values.minCoeff();
  if (mode == Mode::nonlinear && rec.min_value < 0.0) rec.flags.push_back("negative_initial_data");
  rec.initial_l2_dist = fluctuation_l2(state);
  rec.max_l2_dist = rec.initial_l2_dist;
  const double threshold = cfg.blowup_l2_factor * std::max(rec.initial_l2_dist, 1.0);

  std::vector<double> targets = opts.checkpoints;
  targets.push_back(cfg.horizon);
  std::sort(targets.begin(), targets.end());
  targets.erase(std::remove_if(targets.begin(), targets.end(),
                               [&](double x) { return !(x > 0.0) || x > cfg.horizon; }),
                targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  size_t next_target = 0;

  double t = 0.0;
  double crit2 = 0.0, crit4 = 0.0;
  double l2 = rec.initial_l2_dist;
  double last_dt = 0.0;
  auto record = [&]() {
    if (!rec.series.empty() && rec.series.back().t >= t) return;
    DiagnosticsVector d = sample(state, g, ws, cfg, moment_ok);
    d.t = t;
    d.crit_r2 = crit2;
    d.crit_r4 = crit4;
    d.dt = last_dt;
    rec.series.push_back(d);
  };
  record();

  Eigen::ArrayXcd n0;
  Eigen::ArrayXcd previous;
  bool energy_increase = false;
  rec.outcome.t_star = cfg.horizon;
  while (next_target < targets.size()) {
    const auto stats = op.evaluate(state, n0);
    rec.min_value = std::min(rec.min_value, stats.min_value);

    double dt_max = cfg.dt_init;
    if (stats.max_speed > 0.0) dt_max = std::min(dt_max, cfg.cfl * g.spacing() / stats.max_speed);
    if (!(dt_max >= cfg.dt_floor)) {
      rec.outcome = {true, t, Trigger::dt_floor};
      record();
      break;
    }
    double dt = cfg.dt_init;
    if (dt_max < cfg.dt_init) {
      const int m = static_cast<int>(std::ceil(ladder_steps * std::log2(cfg.dt_init / dt_max) - 1e-9));
      dt = cfg.dt_init * std::exp2(-static_cast<double>(m) / ladder_steps);
      if (dt > dt_max) dt = cfg.dt_init * std::exp2(-static_cast<double>(m + 1) / ladder_steps);
    }
    const double target = targets[next_target];
    bool lands = false;
    if (t + dt >= target - 1e-12 * std::max(1.0, target)) {
      dt = target - t;
      lands = true;
    }

    previous = state;
    stepper.advance(state, dt, n0, op);
    ++rec.steps;
    const double t_new = lands ? target : t + dt;

    if (!state.allFinite()) {
      state = previous;
      rec.outcome = {true, t_new, Trigger::nonfinite};
      record();
      break;
    }
    if (mode == Mode::linear) state[0] = 0.0;
    const double l2_new = fluctuation_l2(state);
    if (mode == Mode::linear && l2_new > l2 * (1.0 + 1e-13)) energy_increase = true;
    crit2 += 0.5 * dt * (l2 * l2 + l2_new * l2_new);
    crit4 += 0.5 * dt * (std::pow(l2, 4) + std::pow(l2_new, 4));
    l2 = l2_new;
    rec.max_l2_dist = std::max(rec.max_l2_dist, l2);
    rec.max_mean_drift = std::max(rec.max_mean_drift, std::abs(state[0] - mean0));
    t = t_new;
    last_dt = dt;
    if (lands) ++next_target;

    if (mode == Mode::nonlinear && l2 > threshold) {
      rec.outcome = {true, t, Trigger::l2_threshold};
      record();
      break;
    }
    if (lands || rec.steps % cfg.record_every == 0) record();
  }
  if (!rec.outcome.blowup) record();

  {
    Field final_field(g);
    ws.inverse(state, final_field.values);
    rec.min_value = std::min(rec.min_value, final_field.values.minCoeff());
    if (opts.keep_final_state) {
      rec.final_state = std::move(final_field);
      rec.final_spectrum = SpectralField(g, state);
    }
  }

  rec.initial_norm = initial_norm;
  rec.final_norm = std::sqrt(state.abs2().sum());
  if (mode == Mode::nonlinear && rec.min_value < -1e-6 * rec.initial_max) rec.flags.push_back("positivity_violation");
  if (energy_increase) rec.flags.push_back("energy_increase");
  if (mode == Mode::transport && initial_norm > 0.0) {
    const double loss = 1.0 - rec.final_norm / initial_norm;
    if (loss > cfg.filter_loss_budget) rec.flags.push_back("resolution_limited");
  }
  return rec;
}

}  // namespace

std::string_view to_string(Integrator i) { return i == Integrator::etd2 ? "etd2" : "etd_rk4"; }

Integrator parse_integrator(std::string_view s) {
  if (s == "etd2") return Integrator::etd2;
  if (s == "etd_rk4") return Integrator::etd_rk4;
  throw std::invalid_argument("unknown integrator '" + std::string(s) + "'");
}

std::string_view to_string(Trigger t) {
  switch (t) {
    case Trigger::l2_threshold: return "l2_threshold";
    case Trigger::dt_floor: return "dt_floor";
    case Trigger::nonfinite: return "nonfinite";
  }
  return "l2_threshold";
}

std::string_view to_string(BracketStatus s) {
  switch (s) {
    case BracketStatus::bracketed: return "bracketed";
    case BracketStatus::non_monotone: return "non_monotone";
    case BracketStatus::all_global: return "all_global";
    case BracketStatus::all_blowup: return "all_blowup";
  }
  return "all_global";
}

bool RunRecord::has_flag(std::string_view f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }

std::vector<std::string> validate(const SolverConfig& cfg) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("solver." + key + ": " + why);
  };
  if (!(cfg.gamma > 0.0)) fail("gamma", "must be > 0");
  if (!(cfg.dt_init > 0.0)) fail("dt_init", "must be > 0");
  if (!(cfg.cfl > 0.0 && cfg.cfl <= 1.0)) fail("cfl", "must lie in (0, 1]");
  if (!(cfg.dt_floor > 0.0)) fail("dt_floor", "must be > 0");
  if (!(cfg.dt_floor < cfg.dt_init)) fail("dt_floor", "must be smaller than dt_init");
  if (!(cfg.blowup_l2_factor > 1.0)) fail("blowup_l2_factor", "must be > 1");
  if (!(cfg.horizon > 0.0)) fail("horizon", "must be > 0");
  if (cfg.record_every < 1) fail("record_every", "must be >= 1");
  if (!(cfg.filter_rate >= 0.0)) fail("filter_rate", "must be >= 0");
  if (!(cfg.filter_order > 0.0)) fail("filter_order", "must be > 0");
  if (!(cfg.filter_loss_budget > 0.0)) fail("filter_loss_budget", "must be > 0");
  std::vector<std::string> warnings;
  if (!(cfg.gamma > 1.0 && cfg.gamma <= 2.0)) warnings.push_back("gamma_outside_1_2");
  return warnings;
}

double phi_function(int k, double z) {
  if (k < 0) throw std::invalid_argument("phi_function: k must be >= 0");
  if (std::abs(z) < 1.0) {
    double factorial = 1.0;
    for (int j = 2; j <= k; ++j) factorial *= j;
    double term = 1.0 / factorial;
    double sum = term;
    for (int j = 1; j < 40; ++j) {
      term *= z / (j + k);
      sum += term;
    }
    return sum;
  }
  double value = std::exp(z);
  double factorial = 1.0;
  for (int j = 0; j < k; ++j) {
    if (j > 0) factorial *= j;
    value = (value - 1.0 / factorial) / z;
  }
  return value;
}

Eigen::ArrayXd dissipation_rates(const Grid& g, const SolverConfig& cfg) {
  return lambda_multiplier(g, cfg.gamma, cfg.convention);
}

Field rhs_nonlinear(const Field& rho, const VelocityField& u, double A, const KernelSpec& ks) {
  if (!all_finite(rho)) throw NonFiniteState("rhs_nonlinear: non-finite input");
  DriftOperator op(rho.grid, u, A, ks);
  Eigen::ArrayXcd state, out;
  forward_transform(rho.grid, rho.values, state);
  op.evaluate(state, out);
  Field f(rho.grid);
  inverse_transform(rho.grid, out, f.values);
  return f;
}

Field step(const Field& rho, double /*t*/, double dt, const SolverConfig& cfg, const VelocityField& u, double A,
           const KernelSpec& ks) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
  if (!all_finite(rho)) throw NonFiniteState("step: non-finite state");
  DriftOperator op(rho.grid, u, A, ks);
  ExponentialStepper stepper(dissipation_rates(rho.grid, cfg), cfg.integrator);
  Eigen::ArrayXcd state, n0;
  forward_transform(rho.grid, rho.values, state);
  op.evaluate(state, n0);
  stepper.advance(state, dt, n0, op);
  if (!state.allFinite()) throw NonFiniteState("step: state became non-finite");
  Field out(rho.grid);
  inverse_transform(rho.grid, state, out.values);
  return out;
}

RunRecord run_nonlinear(const Field& rho0, const VelocityField& u, double A, const KernelSpec& ks,
                        const SolverConfig& cfg, const RunOptions& opts) {
  return integrate(Mode::nonlinear, rho0, u, A, ks, cfg, opts);
}

RunRecord run_linear(const Field& mu0, const VelocityField& u, double A, const SolverConfig& cfg,
                     const RunOptions& opts) {
  return integrate(Mode::linear, mu0, u, A, null_kernel(mu0.grid), cfg, opts);
}

RunRecord run_transport(const Field& eta0, const VelocityField& v, const SolverConfig& cfg, const RunOptions& opts) {
  return integrate(Mode::transport, eta0, v, 1.0, null_kernel(eta0.grid), cfg, opts);
}

double fitted_log_growth_rate(const std::vector<DiagnosticsVector>& series) {
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  int count = 0;
  for (const auto& d : series) {
    if (!(d.hgamma2 > 0.0)) continue;
    const double y = std::log(d.hgamma2);
    st += d.t;
    sy += y;
    stt += d.t * d.t;
    sty += d.t * y;
    ++count;
  }
  if (count < 2) return 0.0;
  const double denom = count * stt - st * st;
  return denom != 0.0 ? (count * sty - st * sy) / denom : 0.0;
}

ThresholdResult find_threshold_amplitude(const AmplitudeProblem& problem, const std::vector<double>& amplitudes,
                                         int threads) {
  if (amplitudes.empty()) throw std::invalid_argument("find_threshold_amplitude: empty amplitude list");
  if (!std::is_sorted(amplitudes.begin(), amplitudes.end()))
    throw std::invalid_argument("find_threshold_amplitude: amplitudes must be sorted");
  ThresholdResult res;
  res.amplitudes = amplitudes;
  res.runs.resize(amplitudes.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next++; i < amplitudes.size(); i = next++) {
      RunOptions opts;
      opts.keep_final_state = false;
      res.runs[i] = run_nonlinear(problem.rho0, problem.u, amplitudes[i], problem.ks, problem.config, opts);
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(amplitudes.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  bool any_blowup = false, any_global = false;
  for (size_t i = 0; i < amplitudes.size(); ++i) {
    if (res.runs[i].outcome.blowup) {
      any_blowup = true;
      res.a_low = amplitudes[i];
    } else {
      any_global = true;
      if (!res.a_high) res.a_high = amplitudes[i];
    }
  }
  if (!any_blowup) {
    res.status = BracketStatus::all_global;
  } else if (!any_global) {
    res.status = BracketStatus::all_blowup;
  } else {
    res.status = *res.a_low < *res.a_high ? BracketStatus::bracketed : BracketStatus::non_monotone;
    if (!res.runs.front().outcome.blowup) res.status = BracketStatus::non_monotone;
  }
  return res;
}

}  // namespace aggflow
