#include "aggflow/diagnostics.hpp"
#include "aggflow/field_io.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <numbers>

using namespace aggflow;

namespace {
Field centred_gaussian(const Grid& g, double w, double mass) {
  Eigen::ArrayXd f = (-0.5 * g.radius().square() / (w * w)).exp();
  return Field(g, f * mass / f.mean());
}
}  // namespace

TEST_CASE("second moment preconditions") {
  const Grid g = make_grid(2, 64);
  const Field c = Field::constant(g, 1.0);
  CHECK_THROWS_AS(second_moment(c, 0.13), std::invalid_argument);
  CHECK_THROWS_AS(second_moment(c, 0.05), std::invalid_argument);  // b < 4h
  CHECK_NOTHROW(second_moment(c, 0.1));
}

TEST_CASE("second moment of a constant is the weighted area integral") {
  const Grid g = make_grid(2, 128);
  const double b = 0.1;
  // oracle: 2 pi int_0^b r^3 phi(r/b) dr by composite Simpson
  const int m = 20000;
  double s = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double r = b * i / m;
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * r * r * r * moment_cutoff(r, b);
  }
  const double exact = 2.0 * std::numbers::pi * s * (b / m) / 3.0;
  CHECK(second_moment(Field::constant(g, 2.0), b) == doctest::Approx(2.0 * exact).epsilon(1e-8));
}

TEST_CASE("second moment is linear and monotone") {
  const Grid g = make_grid(2, 64);
  const Field f = oracle::random_field(g, 1, 1.5), h = oracle::random_field(g, 2, 1.5);
  const double b = 0.1;
  CHECK(second_moment(Field(g, 2.0 * f.values - 3.0 * h.values), b) ==
        doctest::Approx(2.0 * second_moment(f, b) - 3.0 * second_moment(h, b)).epsilon(1e-12));
  CHECK(second_moment(Field(g, f.values + h.values.abs()), b) >= second_moment(f, b));
}

TEST_CASE("second moment of a tight bump") {
  const Grid g = make_grid(2, 512);
  const double w = 0.012, M = 3.0;
  const double m2 = second_moment(centred_gaussian(g, w, M), 0.1);
  CHECK(m2 > 0.0);
  CHECK(m2 == doctest::Approx(M * 2.0 * w * w).epsilon(1e-2));
}

TEST_CASE("annular mass") {
  const double b = 0.1;
  const Grid g = make_grid(2, 128);
  const double disk = std::numbers::pi * b * b;
  CHECK(std::abs(annular_mass(Field::constant(g, 1.0), b).mass - (1.0 - disk)) <= 2.0 * std::numbers::pi * b * g.spacing());

  const Field inner(g, (g.radius() < 0.5 * b).cast<double>());
  CHECK(annular_mass(inner, b).mass == 0.0);
  CHECK(!annular_mass(inner, b).negative_values);
  CHECK(annular_mass(Field::constant(g, -1.0), b).negative_values);

  auto gaussian_annulus = [&](int n) { return annular_mass(centred_gaussian(make_grid(2, n), 0.05, 1.0), b).mass; };
  const double fine = gaussian_annulus(1024);
  CHECK(gaussian_annulus(64) == doctest::Approx(fine).epsilon(1e-2));
}

TEST_CASE("criticality report") {
  auto r = criticality_report(0.0, 1.5, 1.0, 2);
  CHECK(r.gamma_c == 2.0);
  CHECK(r.regime == CriticalityRegime::supercritical);
  CHECK(r.in_analysed_range);
  CHECK(criticality_report(0.0, 2.0, 1.0, 2).regime == CriticalityRegime::critical);
  CHECK(criticality_report(0.0, 2.5, 1.0, 2).regime == CriticalityRegime::subcritical);
  for (int d : {2, 3})
    for (double p : {1.0, 1.5, 4.0}) CHECK(criticality_report(d - 2.0, 1.5, p, d).lp_critical == doctest::Approx(d / p));
  CHECK(!criticality_report(0.0, 0.9, 1.0, 2).in_analysed_range);
}

TEST_CASE("diagnostics recompute identically from a persisted field") {
  const Grid g = make_grid(2, 64);
  const Field f = oracle::random_field(g, 77, 2.0);
  const auto path = std::filesystem::temp_directory_path() / "aggflow_diag_field.txt";
  write_field_table(path, {f});
  const Field back = read_field_table(path).front();
  std::filesystem::remove(path);
  const auto a = measure_state(f, forward(f), 1.5, 0.12).as_array();
  const auto b = measure_state(back, forward(back), 1.5, 0.12).as_array();
  CHECK(a == b);
}
