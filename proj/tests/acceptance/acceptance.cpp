#include "aggflow/diagnostics.hpp"
#include "aggflow/dynamics.hpp"
#include "aggflow/format.hpp"
#include "aggflow/harness.hpp"
#include "aggflow/kernels.hpp"
#include "aggflow/spectral.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace aggflow;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path config_dir = AGGFLOW_CONFIG_DIR;
const fs::path out_root = AGGFLOW_ACCEPTANCE_OUT;

// configs whose manifests feed the conservation check
const std::vector<std::string> nonlinear_runs = {"blowup",      "blowup_fine",    "global",
                                                 "global_fine", "suppression",    "ks_suppression"};

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
    pass = pass && ok;
  }
};

std::string num(double x) { return format_double(x); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig config(const std::string& name) { return load_config(config_dir / (name + ".cfg")); }

ExperimentResult run(const std::string& name, const fs::path& dir) {
  RunContext ctx;
  ctx.output_dir = dir;
  ctx.threads = 1;
  return run_experiment(config(name), ctx);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json manifest(const fs::path& dir) { return json::parse(slurp(dir / "manifest.json")); }

struct Series {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  size_t column(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) - header.begin();
  }
};

Series read_csv(const fs::path& p) {
  Series s;
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) s.header.push_back(cell);
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::vector<double> row;
    for (std::string cell; std::getline(ls, cell, ',');) row.push_back(std::stod(cell));
    s.rows.push_back(row);
  }
  return s;
}

Field random_field(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(g);
  for (Index i = 0; i < g.size(); ++i) f.values[i] = u(rng);
  return f;
}

Verdict spectral_identities() {
  Verdict v;
  const Grid g(2, 32);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> sig(0.0, 2.5);
  const auto conv = MultiplierConvention::paper_lambda;
  double semigroup = 0.0, adjoint = 0.0, norm = 0.0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    const Field f = random_field(g, rng), h = random_field(g, rng);
    const double s1 = sig(rng), s2 = sig(rng);
    const auto F = forward(f);
    const auto two = apply_lambda(apply_lambda(F, s1, conv), s2, conv);
    const auto one = apply_lambda(F, s1 + s2, conv);
    semigroup = std::max(semigroup, (two.coeffs - one.coeffs).abs().maxCoeff() / std::max(1.0, one.coeffs.abs().maxCoeff()));
    const double lhs = inner_product(apply_lambda(f, s1, conv), h);
    const double rhs = inner_product(f, apply_lambda(h, s1, conv));
    adjoint = std::max(adjoint, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    const double a = sobolev_norm(f, s1, true), b = l2_norm(apply_lambda(f, s1, conv));
    norm = std::max(norm, std::abs(a - b) / std::max(1.0, b));
  }
  v.require(semigroup <= 1e-12, "semigroup " + num(semigroup));
  v.require(adjoint <= 1e-12, "self-adjointness " + num(adjoint));
  v.require(norm <= 1e-12, "norm identity " + num(norm));
  v.detail += " over " + std::to_string(trials) + " fields";
  return v;
}

Verdict heat_exactness() {
  Verdict v;
  const Grid g(2, 32);
  std::mt19937_64 rng(77);
  const Field f0 = random_field(g, rng);
  const auto F0 = forward(f0);
  for (auto conv : {MultiplierConvention::laplacian_consistent, MultiplierConvention::paper_lambda}) {
    for (double gamma : {1.2, 1.5, 2.0}) {
      SolverConfig c;
      c.gamma = gamma;
      c.convention = conv;
      c.horizon = 1.0;
      RunOptions opts;
      opts.keep_final_state = true;
      const auto rec = run_nonlinear(f0, VelocityField(g), 0.0, null_kernel(g), c, opts);
      const auto lambda = lambda_multiplier(g, gamma, c.convention);
      double worst = 0.0;
      int checked = 0, skipped = 0;
      for (Index i = 0; i < g.size(); ++i) {
        if (lambda[i] > 600.0) {
          ++skipped;
          continue;
        }
        const std::complex<double> exact = std::exp(-lambda[i]) * F0.coeffs[i];
        if (exact == 0.0) continue;
        worst = std::max(worst, std::abs(rec.final_spectrum->coeffs[i] - exact) / std::abs(exact));
        ++checked;
      }
      v.require(worst < 1e-8 && checked > 0,
                std::string(to_string(conv)) + " gamma " + num(gamma) + ": worst " + num(worst) + " on " +
                    std::to_string(checked) + " modes (" + std::to_string(skipped) + " below double range)");
    }
  }
  return v;
}

Verdict conservation() {
  Verdict v;
  for (const auto& name : nonlinear_runs) {
    const fs::path dir = out_root / name;
    if (!fs::exists(dir / "manifest.json")) {
      v.require(false, name + ": no manifest (run the producing criterion first)");
      continue;
    }
    const json m = manifest(dir);
    std::vector<json> outcomes;
    if (m.contains("outcome")) outcomes.push_back(m["outcome"]);
    if (m.contains("runs"))
      for (const auto& r : m["runs"]) outcomes.push_back(r);
    double drift = 0.0, lowest = std::numeric_limits<double>::infinity();
    for (const auto& o : outcomes) {
      drift = std::max(drift, o["max_mean_drift"].get<double>() / std::abs(o["initial_mean"].get<double>()));
      lowest = std::min(lowest, o["min_value"].get<double>() / o["initial_max"].get<double>());
    }
    v.require(!outcomes.empty() && drift <= 1e-10 && lowest >= -1e-6,
              name + " (" + std::to_string(outcomes.size()) + " runs) drift " + num(drift) + " min/max0 " + num(lowest));
  }
  return v;
}

Verdict lp_suite() {
  Verdict v;
  for (const auto& line : lp_checks(config("lp_check"))) v.require(line.passed, line.name + ": " + line.detail);
  return v;
}

bool strictly_decreasing_final_quarter(const Series& s, std::string& note) {
  const size_t t = s.column("t"), m = s.column("moment2");
  const double t_end = s.rows.back()[t];
  std::vector<double> vals;
  for (const auto& r : s.rows)
    if (r[t] >= 0.75 * t_end) vals.push_back(r[m]);
  bool dec = vals.size() >= 2;
  for (size_t i = 1; i < vals.size(); ++i) dec = dec && vals[i] < vals[i - 1];
  note = std::to_string(vals.size()) + " samples, " + (vals.empty() ? "" : num(vals.front()) + " -> " + num(vals.back()));
  return dec;
}

Verdict blowup_reproduction() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  for (const std::string name : {"blowup", "blowup_fine"}) {
    const fs::path dir = out_root / name;
    run(name, dir);
    const json o = manifest(dir)["outcome"];
    v.require(o["label"] == "blowup", name + " " + o["label"].get<std::string>() + " at t=" + num(o["t_end"]));
    std::string note;
    const bool dec = strictly_decreasing_final_quarter(read_csv(dir / "series.csv"), note);
    v.require(dec, name + " moment2 decreasing on final quarter (" + note + ")");
  }
  for (const std::string name : {"global", "global_fine"}) {
    const fs::path dir = out_root / name;
    run(name, dir);
    const json o = manifest(dir)["outcome"];
    v.require(o["label"] == "global", name + " " + o["label"].get<std::string>());
  }
  const double secs = seconds_since(t0);
  v.require(secs < 300.0, "runtime " + num(secs) + " s");
  return v;
}

Verdict suppression_sweep(const std::string& name, double limit) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = out_root / name;
  run(name, dir);
  const json m = manifest(dir);
  const json& b = m["bracket"];
  v.require(b["status"] == "bracketed", "bracket status " + b["status"].get<std::string>());
  if (b["A_low"].is_number() && b["A_high"].is_number()) {
    double a_low = b["A_low"], a_high = b["A_high"];
    std::string low_label, high_label;
    for (const auto& r : m["runs"]) {
      if (r["A"] == a_low) low_label = r["label"];
      if (r["A"] == a_high) high_label = r["label"];
    }
    v.require(low_label == "blowup" && high_label == "global",
              "A_low " + num(a_low) + " " + low_label + ", A_high " + num(a_high) + " " + high_label);
    const double first = m["runs"].front()["A"];
    v.require(first != 0.0 || m["runs"].front()["label"] == "blowup", "A=0 run blows up");
  }
  const double secs = seconds_since(t0);
  v.require(secs < limit, "runtime " + num(secs) + " s");
  return v;
}

Verdict enhanced_relaxation() {
  Verdict v;
  std::vector<double> tc, shear;
  for (const auto& r : relaxation_ratios(config("relax_tc"), 1)) tc.push_back(r.ratio);
  for (const auto& r : relaxation_ratios(config("relax_shear"), 1)) shear.push_back(r.ratio);
  bool dec = tc.size() == 4;
  std::string list;
  for (size_t i = 0; i < tc.size(); ++i) {
    if (i) dec = dec && tc[i] < tc[i - 1];
    list += (i ? ", " : "") + num(tc[i]);
  }
  v.require(dec, "time-changed ratios strictly decreasing [" + list + "]");
  double spread = 0.0;
  for (double r : shear) spread = std::max(spread, std::abs(r - shear.front()));
  v.require(shear.size() == 4 && spread <= 1e-8, "shear ratio " + num(shear.front()) + " spread " + num(spread));
  return v;
}

Verdict transport_bound() {
  Verdict v;
  for (const std::string name : {"translation", "time_changed", "shear"}) {
    const TransportResult tr = transport_study(config("transport_" + name));
    v.require(tr.slope <= tr.bound && tr.filter_loss <= 1e-4 && !tr.resolution_limited,
              name + " slope " + num(tr.slope) + " <= " + num(tr.bound) + ", filter loss " + num(tr.filter_loss));
  }
  v.detail += " (C_impl " + num(transport_bound_constant) + ")";
  return v;
}

Verdict keller_segel() {
  Verdict v;
  for (const auto& line : kernel_checks(config("kernel_check")))
    if (line.name == "keller_segel_inverse") v.require(line.passed, line.name + ": " + line.detail);
  const Verdict s = suppression_sweep("ks_suppression", 1200.0);
  v.require(s.pass, "sweep: " + s.detail);
  return v;
}

Verdict determinism() {
  Verdict v;
  const std::vector<std::string> names = {"blowup",        "global",           "relax_tc",
                                          "relax_shear",   "transport_shear",  "transport_time_changed",
                                          "transport_translation"};
  for (const auto& name : names) {
    const fs::path a = out_root / "determinism" / name / "a", b = out_root / "determinism" / name / "b";
    const auto ra = run(name, a);
    run(name, b);
    int csvs = 0, same = 0;
    for (const auto& p : ra.artifacts) {
      if (p.extension() != ".csv") continue;
      ++csvs;
      same += slurp(p) == slurp(b / p.filename());
    }
    v.require(csvs > 0 && same == csvs, name + " " + std::to_string(same) + "/" + std::to_string(csvs) + " identical");
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <criterion 1-10>\n";
    return 2;
  }
  const int n = std::atoi(argv[1]);
  Verdict v;
  try {
    switch (n) {
      case 1: v = spectral_identities(); break;
      case 2: v = heat_exactness(); break;
      case 3: v = conservation(); break;
      case 4: v = lp_suite(); break;
      case 5: v = blowup_reproduction(); break;
      case 6: v = suppression_sweep("suppression", 1200.0); break;
      case 7: v = enhanced_relaxation(); break;
      case 8: v = transport_bound(); break;
      case 9: v = keller_segel(); break;
      case 10: v = determinism(); break;
      default:
        std::cerr << "unknown criterion " << argv[1] << "\n";
        return 2;
    }
  } catch (const std::exception& e) {
    v.require(false, std::string("exception: ") + e.what());
  }
  std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << " " << v.detail << std::endl;
  return v.pass ? 0 : 1;
}
