#include "aggflow/dynamics.hpp"
#include "aggflow/harness.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numbers>

using namespace aggflow;

namespace {
constexpr double tau = 2.0 * std::numbers::pi;

Field cosine(const Grid& g, int axis, int k) { return Field(g, (tau * k * g.coordinate(axis)).cos()); }

double oracle_rate(double knorm, double gamma, MultiplierConvention c) {
  if (knorm == 0.0) return 0.0;
  return c == MultiplierConvention::paper_lambda ? std::pow(knorm, gamma) : std::pow(tau * knorm, gamma);
}

double phi_closed(int k, double z) {
  switch (k) {
    case 0: return std::exp(z);
    case 1: return std::expm1(z) / z;
    case 2: return (std::expm1(z) - z) / (z * z);
    default: return (std::expm1(z) - z - 0.5 * z * z) / (z * z * z);
  }
}

Field blowup_datum(const Grid& g, double mass) {
  InitialSpec s;
  s.kind = InitialKind::gaussian;
  s.mass = mass;
  s.width = 0.08;
  return make_initial_data(s, g);
}
}  // namespace

TEST_CASE("phi functions") {
  for (int k = 0; k <= 3; ++k) {
    CHECK(phi_function(k, 0.0) == doctest::Approx(1.0 / std::tgamma(k + 1.0)).epsilon(1e-15));
    for (double z : {-1e4, -50.0, -3.0, -1.0, -0.7, -0.01, 1e-5, 0.4}) {
      const double exact = phi_closed(k, z);
      // the closed forms cancel badly for small |z|; compare there against the series bound only
      if (std::abs(z) >= 0.5) CHECK(phi_function(k, z) == doctest::Approx(exact).epsilon(1e-12));
    }
  }
  // phi_k(z) = z phi_{k+1}(z) + 1/k!
  for (double z : {-0.3, -0.999, -1.001, -7.0})
    for (int k = 0; k <= 2; ++k)
      CHECK(phi_function(k, z) == doctest::Approx(z * phi_function(k + 1, z) + 1.0 / std::tgamma(k + 1.0)).epsilon(1e-13));
}

TEST_CASE("solver config validation names the field") {
  SolverConfig c;
  c.cfl = 1.5;
  CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("solver.cfl"), std::invalid_argument);
  c = SolverConfig{};
  c.dt_floor = 1.0;
  CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("solver.dt_floor"), std::invalid_argument);
  c = SolverConfig{};
  c.blowup_l2_factor = 1.0;
  CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("solver.blowup_l2_factor"), std::invalid_argument);
  c = SolverConfig{};
  c.gamma = 2.5;
  CHECK(validate(c) == std::vector<std::string>{"gamma_outside_1_2"});
}

TEST_CASE("right-hand side") {
  const Grid g = make_grid(2, 32);
  FlowSpec fs;
  fs.family = FlowFamily::time_changed_translation;
  fs.profile.amplitudes = {0.5};
  const auto u = build_flow(fs, g);
  const auto ks = build_power_kernel(g, 0.0, 0.2);
  CHECK(rhs_nonlinear(Field::constant(g, 2.0), u, 3.0, ks).values.abs().maxCoeff() < 1e-12);
  for (int trial = 0; trial < 10; ++trial) {
    const Field rho = oracle::random_field(g, 500 + trial, 2.0);
    const Field r = rhs_nonlinear(rho, u, 5.0, ks);
    CHECK(std::abs(r.values.mean()) <= 1e-12 * l2_norm(rho));
    CHECK(std::abs(rhs_nonlinear(rho, u, 0.0, build_ks_kernel(g)).values.mean()) <= 1e-12 * l2_norm(rho));
  }
  Field bad = Field::constant(g, 1.0);
  bad.values[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(rhs_nonlinear(bad, u, 1.0, ks), NonFiniteState);
}

TEST_CASE("keller-segel linearisation about a constant state") {
  // div(rho grad Delta^{-1}(rho - mean)) = mean (rho - mean) + O(delta^2)
  const Grid g = make_grid(2, 32);
  const double mean = 1.7;
  const Field mode(g, (tau * g.coordinate(0)).cos() * (tau * 2 * g.coordinate(1)).sin());
  double prev = 0.0;
  for (double delta : {1e-2, 5e-3, 2.5e-3}) {
    const Field rho(g, mean + delta * mode.values);
    const Field r = rhs_nonlinear(rho, VelocityField(g), 0.0, build_ks_kernel(g));
    const double err = (r.values - mean * delta * mode.values).abs().maxCoeff();
    CHECK(err <= 2.0 * delta * delta);
    if (prev > 0.0) CHECK(err == doctest::Approx(prev / 4.0).epsilon(1e-3));
    prev = err;
  }
}

TEST_CASE("single steps of the fractional heat equation") {
  const Grid g = make_grid(2, 32);
  SolverConfig c;
  c.convention = MultiplierConvention::paper_lambda;
  c.gamma = 1.5;
  for (auto integ : {Integrator::etd2, Integrator::etd_rk4}) {
    c.integrator = integ;
    const Field one = step(cosine(g, 0, 1), 0.0, 0.1, c, VelocityField(g), 0.0, null_kernel(g));
    CHECK((one.values - std::exp(-0.1) * cosine(g, 0, 1).values).abs().maxCoeff() < 1e-14);
    const Field two = step(cosine(g, 0, 2), 0.0, 0.1, c, VelocityField(g), 0.0, null_kernel(g));
    CHECK((two.values - std::exp(-0.1 * std::pow(2.0, 1.5)) * cosine(g, 0, 2).values).abs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("fractional heat decay is exact per mode") {
  const Grid g = make_grid(2, 32);
  const Field f0 = oracle::random_field(g, 8, 0.5);
  const auto F0 = forward(f0);
  for (auto conv : {MultiplierConvention::paper_lambda, MultiplierConvention::laplacian_consistent}) {
    for (double gamma : {1.2, 1.5, 2.0}) {
      SolverConfig c;
      c.gamma = gamma;
      c.convention = conv;
      c.horizon = 1.0;
      const auto rec = run_nonlinear(f0, VelocityField(g), 0.0, null_kernel(g), c);
      REQUIRE(rec.final_spectrum);
      double worst = 0.0;
      int checked = 0;
      for (Index i = 0; i < g.size(); ++i) {
        const double rate = oracle_rate(g.wavenumber_norm()[i], gamma, conv);
        if (rate > 600.0) continue;  // below the normal double range
        const std::complex<double> exact = std::exp(-rate) * F0.coeffs[i];
        worst = std::max(worst, std::abs(rec.final_spectrum->coeffs[i] - exact) / std::abs(exact));
        ++checked;
      }
      CHECK(checked > 20);
      CHECK(worst < 1e-8);
      CHECK(!rec.outcome.blowup);
    }
  }
}

TEST_CASE("self-convergence of the integrators") {
  const Grid g = make_grid(2, 32);
  FlowSpec fs;
  fs.family = FlowFamily::time_changed_translation;
  fs.profile.amplitudes = {0.5};
  const auto u = build_flow(fs, g);
  const auto ks = build_power_kernel(g, 0.0, 0.2);
  const Field rho0 = oracle::smooth_field(g, 21, 3, 3.0);
  const double T = 0.2;
  auto solve = [&](Integrator integ, double dt) {
    SolverConfig c;
    c.integrator = integ;
    Field rho = rho0;
    const int steps = static_cast<int>(std::lround(T / dt));
    for (int i = 0; i < steps; ++i) rho = step(rho, i * dt, dt, c, u, 2.0, ks);
    return rho;
  };
  for (auto integ : {Integrator::etd2, Integrator::etd_rk4}) {
    const double dt = 0.02;
    const Field ref = solve(integ, dt / 8);
    const double e1 = (solve(integ, dt).values - ref.values).abs().maxCoeff();
    const double e2 = (solve(integ, dt / 2).values - ref.values).abs().maxCoeff();
    CHECK(e2 > 0.0);
    CHECK(e1 / e2 >= 3.5);
  }
}

TEST_CASE("constant data is an equilibrium") {
  const Grid g = make_grid(2, 32);
  SolverConfig c;
  c.horizon = 0.1;
  const auto rec = run_nonlinear(Field::constant(g, 1.3), VelocityField(g), 0.0, build_power_kernel(g, 0.0, 0.2), c);
  CHECK(!rec.outcome.blowup);
  for (const auto& d : rec.series) {
    CHECK(d.mean == doctest::Approx(1.3).epsilon(1e-15));
    CHECK(d.l2_dist < 1e-14);
    CHECK(d.min_val == doctest::Approx(1.3).epsilon(1e-14));
  }
  for (size_t i = 1; i < rec.series.size(); ++i) CHECK(rec.series[i].t > rec.series[i - 1].t);
  CHECK(rec.series.back().t == 0.1);
}

TEST_CASE("nonlinear runs conserve the mean") {
  const Grid g = make_grid(2, 32);
  FlowSpec fs;
  fs.family = FlowFamily::time_changed_translation;
  fs.profile.amplitudes = {0.5};
  SolverConfig c;
  c.horizon = 0.2;
  const Field rho0(g, 1.0 + 0.1 * oracle::smooth_field(g, 4, 3).values);
  REQUIRE(rho0.values.minCoeff() > 0.0);
  const auto rec = run_nonlinear(rho0, build_flow(fs, g), 10.0, build_power_kernel(g, 0.0, 0.2), c);
  CHECK(!rec.outcome.blowup);
  CHECK(rec.max_mean_drift <= 1e-10);
  CHECK(!rec.has_flag("positivity_violation"));
  for (size_t i = 1; i < rec.series.size(); ++i) CHECK(rec.series[i].crit_r2 >= rec.series[i - 1].crit_r2);
}

TEST_CASE("linear runs") {
  const Grid g = make_grid(2, 32);
  SolverConfig c;
  c.horizon = 0.5;
  c.convention = MultiplierConvention::paper_lambda;

  // A = 0 follows the exact decay
  const Field mu0 = cosine(g, 0, 3);
  auto rec = run_linear(mu0, VelocityField(g), 0.0, c);
  CHECK(rec.last().l2_dist == doctest::Approx(std::sqrt(0.5) * std::exp(-0.5 * std::pow(3.0, 1.5))).epsilon(1e-10));

  // shear flow and a function of y alone: u.grad mu = 0
  FlowSpec sh;
  sh.family = FlowFamily::shear;
  const auto u = build_flow(sh, g);
  const Field my = cosine(g, 1, 1);
  const double base = run_linear(my, u, 0.0, c).last().l2_dist;
  for (double A : {10.0, 100.0}) {
    const auto r = run_linear(my, u, A, c);
    CHECK(std::abs(r.last().l2_dist - base) <= 1e-8 * base);
    CHECK(!r.has_flag("energy_increase"));
  }

  // the mean is removed
  const auto shifted = run_linear(Field(g, mu0.values + 4.0), VelocityField(g), 0.0, c);
  CHECK(std::abs(shifted.series.front().mean) < 1e-15);
}

TEST_CASE("linear runs land on checkpoints") {
  const Grid g = make_grid(2, 16);
  SolverConfig c;
  c.horizon = 0.5;
  RunOptions o;
  o.checkpoints = {0.1234, 0.3};
  const auto rec = run_linear(cosine(g, 0, 1), VelocityField(g), 0.0, c, o);
  std::vector<double> ts;
  for (const auto& d : rec.series) ts.push_back(d.t);
  CHECK(std::find(ts.begin(), ts.end(), 0.1234) != ts.end());
  CHECK(std::find(ts.begin(), ts.end(), 0.3) != ts.end());
  CHECK(ts.back() == 0.5);
}

TEST_CASE("transport runs") {
  const Grid g = make_grid(2, 32);
  SolverConfig c;
  c.horizon = 1.0;
  const Field eta0 = oracle::smooth_field(g, 3, 4);
  const auto still = run_transport(eta0, VelocityField(g), c);
  CHECK(std::abs(still.final_norm - still.initial_norm) <= 1e-8 * still.initial_norm);
  CHECK(std::abs(fitted_log_growth_rate(still.series)) < 1e-8);

  FlowSpec tr;
  tr.family = FlowFamily::translation;
  const Field single = cosine(g, 1, 2);
  const auto rot = run_transport(single, build_flow(tr, g), c);
  const double h0 = rot.series.front().hgamma2;
  for (const auto& d : rot.series) {
    CHECK(std::abs(d.hgamma2 - h0) <= 1e-8 * h0);
    CHECK(std::abs(d.l2_dist - rot.series.front().l2_dist) <= 1e-8 * h0);
  }
  CHECK(!rot.has_flag("resolution_limited"));
}

TEST_CASE("log growth fit") {
  std::vector<DiagnosticsVector> s;
  for (int i = 0; i < 10; ++i) {
    DiagnosticsVector d;
    d.t = 0.1 * i;
    d.hgamma2 = 2.0 * std::exp(0.7 * d.t);
    s.push_back(d);
  }
  CHECK(fitted_log_growth_rate(s) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("subcritical dissipation prevents collapse of the blowup datum") {
  for (int n : {64, 128}) {
    const Grid g = make_grid(2, n);
    SolverConfig c;
    c.gamma = 2.5;
    c.dt_init = 1e-4;
    c.blowup_l2_factor = 1.2;
    c.horizon = 0.05;
    const auto rec = run_nonlinear(blowup_datum(g, 2.0), VelocityField(g), 0.0, build_power_kernel(g, 0.0, 0.2), c);
    CHECK(!rec.outcome.blowup);
    AmplitudeProblem p{blowup_datum(g, 2.0), VelocityField(g), build_power_kernel(g, 0.0, 0.2), c};
    const auto res = find_threshold_amplitude(p, {0.0});
    CHECK(res.status == BracketStatus::all_global);
  }
}

TEST_CASE("supercritical collapse triggers the l2 criterion") {
  const Grid g = make_grid(2, 64);
  SolverConfig c;
  c.dt_init = 1e-4;
  c.blowup_l2_factor = 1.2;
  c.horizon = 0.05;
  const auto rec = run_nonlinear(blowup_datum(g, 2.0), VelocityField(g), 0.0, build_power_kernel(g, 0.0, 0.2), c);
  CHECK(rec.outcome.blowup);
  CHECK(rec.outcome.trigger == Trigger::l2_threshold);
  CHECK(rec.outcome.t_star < 0.05);
  CHECK(rec.last().t == rec.outcome.t_star);
  CHECK(rec.last().l2_dist > 1.2 * rec.initial_l2_dist);
}

TEST_CASE("threshold bracketing logic") {
  const Grid g = make_grid(2, 16);
  SolverConfig c;
  c.horizon = 0.01;
  AmplitudeProblem p{Field::constant(g, 1.0), VelocityField(g), null_kernel(g), c};
  CHECK_THROWS_AS(find_threshold_amplitude(p, {}), std::invalid_argument);
  CHECK_THROWS_AS(find_threshold_amplitude(p, {2.0, 1.0}), std::invalid_argument);
  const auto r = find_threshold_amplitude(p, {0.0, 1.0, 2.0}, 2);
  CHECK(r.status == BracketStatus::all_global);
  CHECK(r.runs.size() == 3);
}
