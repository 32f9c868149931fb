#include "aggflow/harness.hpp"

#include "aggflow/diagnostics.hpp"
#include "aggflow/field_io.hpp"
#include "aggflow/format.hpp"
#include "aggflow/littlewood_paley.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace aggflow {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"experiment", {"kind", "output", "amplitudes", "times", "dump_final"}},
      {"grid", {"dim", "n"}},
      {"kernel", {"kind", "a", "eps"}},
      {"flow", {"family", "amplitude", "slope", "profile", "phases", "shear_sin", "shear_cos", "file"}},
      {"solver",
       {"gamma", "convention", "dt_init", "cfl", "dt_floor", "blowup_l2_factor", "horizon", "integrator",
        "record_every", "moment_radius", "filter_rate", "filter_order", "filter_loss_budget"}},
      {"initial",
       {"kind", "value", "mass", "width", "center", "wavevector", "amplitude", "mean", "seed", "band", "file"}},
  };
  return s;
}

// Typed access to one parsed file; every error names the key.
class Reader {
 public:
  explicit Reader(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string text(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double real(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return parse_double(it->second, key);
    } catch (const std::invalid_argument&) {
      throw ConfigError(key, "expected a number, got '" + it->second + "'");
    }
  }

  long integer(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return parse_integer(it->second, key);
    } catch (const std::invalid_argument&) {
      throw ConfigError(key, "expected an integer, got '" + it->second + "'");
    }
  }

  bool boolean(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "yes" || it->second == "1") return true;
    if (it->second == "false" || it->second == "no" || it->second == "0") return false;
    throw ConfigError(key, "expected true or false, got '" + it->second + "'");
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto t = trim(item);
      if (t.empty()) continue;
      try {
        out.push_back(parse_double(t, key));
      } catch (const std::invalid_argument&) {
        throw ConfigError(key, "expected a comma-separated list of numbers, got '" + it->second + "'");
      }
    }
    return out;
  }

  template <class Parse>
  auto choice(const std::string& key, const std::string& fallback, Parse parse) const {
    const std::string v = text(key, fallback);
    try {
      return parse(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  }

 private:
  std::map<std::string, std::string> values_;
};

void require(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError(key, message);
}

std::array<double, 3> triple(const Reader& r, const std::string& key, std::array<double, 3> fallback) {
  if (!r.has(key)) return fallback;
  const auto v = r.list(key);
  require(!v.empty() && v.size() <= 3, key, "expected 1 to 3 components");
  std::array<double, 3> out{0, 0, 0};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

void validate_config(ExperimentConfig& cfg) {
  try {
    make_grid(cfg.dim, cfg.n);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.dim < 1 || cfg.dim > 3 ? "grid.dim" : "grid.n", e.what());
  }
  const double h = 1.0 / cfg.n;

  if (cfg.kernel.kind == KernelKind::power) {
    require(cfg.kernel.a >= 0.0, "kernel.a", "must be >= 0");
    require(cfg.dim / (1.0 + cfg.kernel.a) > 1.0, "kernel.a",
            "inadmissible: need dim / (1 + a) > 1 (dim = " + std::to_string(cfg.dim) + ")");
    require(cfg.kernel.eps > 0.0 && cfg.kernel.eps <= 0.25, "kernel.eps", "must lie in (0, 1/4]");
    require(cfg.kernel.eps >= 4.0 * h, "kernel.eps", "unresolved: need eps >= 4/n");
  }

  const auto& f = cfg.flow;
  const bool planar = f.family == FlowFamily::shear || f.family == FlowFamily::translation ||
                      f.family == FlowFamily::time_changed_translation;
  require(!planar || cfg.dim == 2, "flow.family", "'" + std::string(to_string(f.family)) + "' requires grid.dim = 2");
  require(f.amplitude >= 0.0, "flow.amplitude", "must be >= 0");
  require(f.profile.lower_bound() >= 1.0 - max_profile_weight - 1e-15, "flow.profile",
          "sum of |c_m| must not exceed " + format_double(max_profile_weight) + " (keeps Q positive)");
  require(f.profile.phases.size() <= f.profile.amplitudes.size(), "flow.phases", "more phases than profile terms");
  if (f.family == FlowFamily::custom_file) require(fs::exists(f.file), "flow.file", "no such file " + f.file.string());

  try {
    validate(cfg.solver);
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
  }

  const auto& in = cfg.initial;
  switch (in.kind) {
    case InitialKind::gaussian:
      require(in.mass > 0.0, "initial.mass", "must be > 0");
      require(in.width > 0.0, "initial.width", "must be > 0");
      require(in.width >= 4.0 * h, "initial.width",
              "unresolved: width " + format_double(in.width) + " < 4h = " + format_double(4.0 * h));
      break;
    case InitialKind::random_band_limited:
      require(in.band >= 1, "initial.band", "must be >= 1");
      require(3 * in.band < cfg.n, "initial.band", "must be below n/3 so products stay alias-free");
      break;
    case InitialKind::cosine:
      for (int a = 0; a < 3; ++a)
        require(2 * std::abs(in.wavevector[a]) < cfg.n, "initial.wavevector", "mode not representable on the grid");
      break;
    case InitialKind::from_file:
      require(fs::exists(in.file), "initial.file", "no such file " + in.file.string());
      break;
    case InitialKind::constant:
      break;
  }

  switch (cfg.kind) {
    case ExperimentKind::sweep_A:
      require(!cfg.amplitudes.empty(), "experiment.amplitudes", "sweep needs at least one amplitude");
      break;
    case ExperimentKind::relax:
      require(!cfg.amplitudes.empty(), "experiment.amplitudes", "relax needs at least one amplitude");
      require(!cfg.times.empty(), "experiment.times", "relax needs at least one time");
      for (double t : cfg.times) require(t > 0.0, "experiment.times", "times must be > 0");
      break;
    default:
      break;
  }
  for (double A : cfg.amplitudes) require(A >= 0.0, "experiment.amplitudes", "amplitudes must be >= 0");
  std::sort(cfg.amplitudes.begin(), cfg.amplitudes.end());
  std::sort(cfg.times.begin(), cfg.times.end());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

template <class Fn>
void parallel_for(size_t count, int threads, Fn fn) {
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next++; i < count; i = next++) fn(i);
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (workers == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

json outcome_json(const RunRecord& r) {
  json o;
  o["label"] = r.outcome.label();
  o["t_end"] = r.outcome.t_star;
  if (r.outcome.blowup) o["trigger"] = std::string(to_string(r.outcome.trigger));
  o["steps"] = r.steps;
  o["initial_l2_dist"] = r.initial_l2_dist;
  o["max_l2_dist"] = r.max_l2_dist;
  o["terminal_l2_dist"] = r.series.empty() ? 0.0 : r.last().l2_dist;
  o["initial_mean"] = r.series.empty() ? 0.0 : r.series.front().mean;
  o["max_mean_drift"] = r.max_mean_drift;
  o["min_value"] = r.min_value;
  o["initial_max"] = r.initial_max;
  o["flags"] = r.flags;
  return o;
}

json base_manifest(const ExperimentConfig& cfg) {
  json m;
  m["version"] = std::string(version_string);
  m["experiment"] = std::string(to_string(cfg.kind));
  json echo = json::object();
  for (const auto& [k, v] : cfg.echo) echo[k] = v;
  m["config"] = echo;
  m["grid"] = {{"dim", cfg.dim}, {"n", cfg.n}, {"spacing", 1.0 / cfg.n}};
  m["convention"] = {{"solver", std::string(to_string(cfg.solver.convention))}, {"norms", "paper_lambda"}};
  m["dealias"] = "2/3 rule: coefficients with any |k_j| >= n/3 zeroed after every product";
  m["solver"] = {{"gamma", cfg.solver.gamma},
                 {"integrator", std::string(to_string(cfg.solver.integrator))},
                 {"dt_init", cfg.solver.dt_init},
                 {"cfl", cfg.solver.cfl},
                 {"dt_floor", cfg.solver.dt_floor},
                 {"blowup_l2_factor", cfg.solver.blowup_l2_factor},
                 {"horizon", cfg.solver.horizon}};
  if (cfg.initial.kind == InitialKind::random_band_limited) m["seed"] = cfg.initial.seed;
  if (cfg.kernel.kind != KernelKind::none) {
    const double a = cfg.kernel.kind == KernelKind::keller_segel ? cfg.dim - 2.0 : cfg.kernel.a;
    const auto rep = criticality_report(a, cfg.solver.gamma, 1.0, cfg.dim);
    m["criticality"] = {{"a", a},
                        {"gamma_c", rep.gamma_c},
                        {"regime", std::string(to_string(rep.regime))},
                        {"in_analysed_range", rep.in_analysed_range}};
  }
  return m;
}

std::string amplitude_tag(double A) { return "A" + format_double(A); }

Field single_component(std::vector<Field> comps, const Grid& g, const fs::path& path) {
  if (comps.size() != 1) throw std::runtime_error(path.string() + ": expected a scalar field table");
  if (comps.front().grid != g) throw std::runtime_error(path.string() + ": grid does not match the configured grid");
  return std::move(comps.front());
}

void report(const RunContext& ctx, const std::string& msg) {
  if (ctx.progress) ctx.progress(msg);
}

double series_value_at(const RunRecord& r, double t) {
  for (const auto& d : r.series)
    if (d.t == t) return d.l2_dist;
  throw std::runtime_error("no sample recorded at t = " + format_double(t));
}

Field random_field(const Grid& g, std::mt19937_64& rng, int band, double amplitude, double mean) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SpectralField F(g);
  for (Index i = 0; i < g.size(); ++i) {
    const auto idx = g.unravel(i);
    std::array<int, 3> k{0, 0, 0};
    bool inside = true, positive = false, decided = false;
    for (int a = 0; a < g.dim(); ++a) {
      k[a] = g.wavenumber(idx[a]);
      if (std::abs(k[a]) > band) inside = false;
      if (!decided && k[a] != 0) {
        positive = k[a] > 0;
        decided = true;
      }
    }
    if (!inside || !positive) continue;
    const double re = normal(rng), im = normal(rng);
    const std::complex<double> c(amplitude * re, amplitude * im);
    F.coeffs[i] = c;
    std::array<int, 3> mk{-k[0], -k[1], -k[2]};
    F.coeffs[g.mode_index(mk)] = std::conj(c);
  }
  F.coeffs[0] = mean;
  return inverse(F);
}

}  // namespace

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::run: return "run";
    case ExperimentKind::sweep_A: return "sweep_A";
    case ExperimentKind::relax: return "relax";
    case ExperimentKind::transport_bound: return "transport_bound";
    case ExperimentKind::lp_check: return "lp_check";
    case ExperimentKind::kernel_check: return "kernel_check";
  }
  return "run";
}

ExperimentKind parse_experiment_kind(std::string_view s) {
  for (auto k : {ExperimentKind::run, ExperimentKind::sweep_A, ExperimentKind::relax, ExperimentKind::transport_bound,
                 ExperimentKind::lp_check, ExperimentKind::kernel_check})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown experiment kind '" + std::string(s) + "'");
}

std::string_view to_string(InitialKind k) {
  switch (k) {
    case InitialKind::constant: return "constant";
    case InitialKind::gaussian: return "gaussian";
    case InitialKind::cosine: return "cosine";
    case InitialKind::random_band_limited: return "random_band_limited";
    case InitialKind::from_file: return "from_file";
  }
  return "constant";
}

namespace {
InitialKind parse_initial_kind(std::string_view s) {
  for (auto k : {InitialKind::constant, InitialKind::gaussian, InitialKind::cosine, InitialKind::random_band_limited,
                 InitialKind::from_file})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown initial data kind '" + std::string(s) + "'");
}
}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir, std::optional<ExperimentKind> kind) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }

  ExperimentConfig cfg;
  std::map<std::string, std::string> values;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(section, "key outside of any section");
    auto it = schema().find(section);
    if (it == schema().end()) throw ConfigError(section, "unknown section");
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      if (!it->second.count(key)) throw ConfigError(full, "unknown key");
      const std::string value(trim(node.data()));
      values[full] = value;
      cfg.echo.emplace_back(full, value);
    }
  }
  const Reader r(values);
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  cfg.kind = r.choice("experiment.kind", std::string(to_string(kind.value_or(ExperimentKind::run))),
                      parse_experiment_kind);
  if (kind && cfg.kind != *kind)
    throw ConfigError("experiment.kind", "config describes '" + std::string(to_string(cfg.kind)) +
                                             "' but the command asked for '" + std::string(to_string(*kind)) + "'");
  cfg.output = r.text("experiment.output", "out");
  cfg.amplitudes = r.list("experiment.amplitudes");
  cfg.times = r.list("experiment.times");
  cfg.dump_final = r.boolean("experiment.dump_final", false);

  cfg.dim = static_cast<int>(r.integer("grid.dim", 2));
  cfg.n = static_cast<int>(r.integer("grid.n", 64));

  cfg.kernel.kind = r.choice("kernel.kind", "none", parse_kernel_kind);
  cfg.kernel.a = r.real("kernel.a", 0.0);
  cfg.kernel.eps = r.real("kernel.eps", 0.2);

  auto& f = cfg.flow;
  f.family = r.choice("flow.family", "zero", parse_flow_family);
  f.amplitude = r.real("flow.amplitude", 1.0);
  f.slope = r.real("flow.slope", f.slope);
  f.profile.amplitudes = r.list("flow.profile");
  f.profile.phases = r.list("flow.phases");
  if (r.has("flow.shear_sin")) f.shear_sin = r.list("flow.shear_sin");
  f.shear_cos = r.list("flow.shear_cos");
  if (r.has("flow.file")) f.file = resolve(r.text("flow.file", ""));

  auto& s = cfg.solver;
  s.gamma = r.real("solver.gamma", s.gamma);
  s.convention = r.choice("solver.convention", std::string(to_string(s.convention)), parse_convention);
  s.dt_init = r.real("solver.dt_init", s.dt_init);
  s.cfl = r.real("solver.cfl", s.cfl);
  s.dt_floor = r.real("solver.dt_floor", s.dt_floor);
  s.blowup_l2_factor = r.real("solver.blowup_l2_factor", s.blowup_l2_factor);
  s.horizon = r.real("solver.horizon", s.horizon);
  s.integrator = r.choice("solver.integrator", std::string(to_string(s.integrator)), parse_integrator);
  s.record_every = static_cast<int>(r.integer("solver.record_every", s.record_every));
  s.moment_radius = r.real("solver.moment_radius", s.moment_radius);
  s.filter_rate = r.real("solver.filter_rate", s.filter_rate);
  s.filter_order = r.real("solver.filter_order", s.filter_order);
  s.filter_loss_budget = r.real("solver.filter_loss_budget", s.filter_loss_budget);

  auto& i = cfg.initial;
  i.kind = r.choice("initial.kind", "constant", parse_initial_kind);
  i.value = r.real("initial.value", i.value);
  i.mass = r.real("initial.mass", i.mass);
  i.width = r.real("initial.width", i.width);
  i.center = triple(r, "initial.center", i.center);
  if (r.has("initial.wavevector")) {
    const auto k = triple(r, "initial.wavevector", {1, 0, 0});
    for (int a = 0; a < 3; ++a) {
      require(k[a] == std::round(k[a]), "initial.wavevector", "components must be integers");
      i.wavevector[a] = static_cast<int>(k[a]);
    }
  }
  i.amplitude = r.real("initial.amplitude", i.amplitude);
  i.mean = r.real("initial.mean", i.mean);
  const long seed = r.integer("initial.seed", 1);
  require(seed >= 0, "initial.seed", "must be >= 0");
  i.seed = static_cast<std::uint64_t>(seed);
  i.band = static_cast<int>(r.integer("initial.band", i.band));
  if (r.has("initial.file")) i.file = resolve(r.text("initial.file", ""));

  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path, std::optional<ExperimentKind> kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path(), kind);
}

Field make_initial_data(const InitialSpec& spec, const Grid& g) {
  switch (spec.kind) {
    case InitialKind::constant:
      return Field::constant(g, spec.value);
    case InitialKind::gaussian: {
      if (!(spec.width >= 4.0 * g.spacing()))
        throw std::invalid_argument("gaussian width " + format_double(spec.width) + " is unresolved (need >= 4h)");
      // separable periodised profile; images beyond ~9 widths are below 1e-18
      const int images = static_cast<int>(std::ceil(9.2 * spec.width)) + 1;
      Field f = Field::constant(g, 1.0);
      for (int a = 0; a < g.dim(); ++a) {
        const Eigen::ArrayXd& x = g.coordinate(a);
        Eigen::ArrayXd profile = Eigen::ArrayXd::Zero(g.size());
        for (int m = -images; m <= images; ++m) {
          const Eigen::ArrayXd s = (x - spec.center[a] + m) / spec.width;
          profile += (-0.5 * s.square()).exp();
        }
        f.values *= profile;
      }
      f.values *= spec.mass / f.values.mean();
      return f;
    }
    case InitialKind::cosine: {
      Eigen::ArrayXd phase = Eigen::ArrayXd::Zero(g.size());
      for (int a = 0; a < g.dim(); ++a) phase += two_pi * spec.wavevector[a] * g.coordinate(a);
      return Field(g, spec.mean + spec.amplitude * phase.cos());
    }
    case InitialKind::random_band_limited: {
      std::mt19937_64 rng(spec.seed);
      return random_field(g, rng, spec.band, spec.amplitude, spec.mean);
    }
    case InitialKind::from_file:
      return single_component(read_field_table(spec.file), g, spec.file);
  }
  throw std::logic_error("unhandled initial data kind");
}

KernelSpec make_kernel(const KernelConfig& k, const Grid& g) {
  switch (k.kind) {
    case KernelKind::none: return null_kernel(g);
    case KernelKind::power: return build_power_kernel(g, k.a, k.eps);
    case KernelKind::keller_segel: return build_ks_kernel(g);
  }
  throw std::logic_error("unhandled kernel kind");
}

fs::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<fs::path>& cli) {
  if (cli) return *cli;
  if (const char* env = std::getenv("AGGFLOW_OUTPUT_DIR"); env != nullptr && *env != '\0') return fs::path(env);
  return cfg.output;
}

int resolve_threads(std::optional<int> cli) {
  if (cli) {
    if (*cli < 1) throw ConfigError("--threads", "must be >= 1");
    return *cli;
  }
  if (const char* env = std::getenv("AGGFLOW_THREADS"); env != nullptr && *env != '\0') {
    long v = 0;
    try {
      v = parse_integer(env, "AGGFLOW_THREADS");
    } catch (const std::invalid_argument&) {
      throw ConfigError("AGGFLOW_THREADS", std::string("expected a positive integer, got '") + env + "'");
    }
    if (v < 1) throw ConfigError("AGGFLOW_THREADS", "must be >= 1");
    return static_cast<int>(v);
  }
  return 1;
}

std::string series_csv(const std::vector<DiagnosticsVector>& series) {
  std::string out;
  for (size_t c = 0; c < DiagnosticsVector::columns.size(); ++c) {
    if (c) out += ',';
    out += DiagnosticsVector::columns[c];
  }
  out += '\n';
  for (const auto& d : series) {
    const auto row = d.as_array();
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_double(row[c]);
    }
    out += '\n';
  }
  return out;
}

std::vector<RelaxRow> relaxation_ratios(const ExperimentConfig& cfg, int threads) {
  const Grid g(cfg.dim, cfg.n);
  const Field mu0 = make_initial_data(cfg.initial, g);
  FlowSpec fs = cfg.flow;
  fs.amplitude = 1.0;
  const VelocityField u = build_flow(fs, g);
  SolverConfig sc = cfg.solver;
  sc.horizon = cfg.times.back();
  RunOptions opts;
  opts.checkpoints = cfg.times;
  opts.keep_final_state = false;
  std::vector<RunRecord> runs(cfg.amplitudes.size());
  parallel_for(runs.size(), threads, [&](size_t i) { runs[i] = run_linear(mu0, u, cfg.amplitudes[i], sc, opts); });
  std::vector<RelaxRow> rows;
  for (size_t i = 0; i < runs.size(); ++i) {
    const double norm0 = runs[i].series.front().l2_dist;
    for (double tau : cfg.times) {
      const double ratio = norm0 > 0.0 ? series_value_at(runs[i], tau) / norm0 : 0.0;
      rows.push_back({cfg.amplitudes[i], tau, ratio});
    }
  }
  return rows;
}

TransportResult transport_study(const ExperimentConfig& cfg) {
  const Grid g(cfg.dim, cfg.n);
  const Field eta0 = make_initial_data(cfg.initial, g);
  const VelocityField v = build_flow(cfg.flow, g);
  TransportResult res;
  res.record = run_transport(eta0, v, cfg.solver);
  res.slope = fitted_log_growth_rate(res.record.series);
  const double sigma = 0.5 * cfg.solver.gamma + 0.5 * cfg.dim + 1.0;
  res.flow_norm = v.is_zero() ? 0.0 : homogeneous_vector_norm(v.components, sigma);
  res.bound = transport_bound_constant * res.flow_norm;
  res.filter_loss = res.record.initial_norm > 0.0 ? 1.0 - res.record.final_norm / res.record.initial_norm : 0.0;
  res.resolution_limited = res.record.has_flag("resolution_limited");
  return res;
}

std::vector<CheckLine> lp_checks(const ExperimentConfig& cfg) {
  const Grid g(cfg.dim, cfg.n);
  std::mt19937_64 rng(cfg.initial.seed);
  std::vector<CheckLine> out;
  const LPBump bump;
  const int top = lp_max_level(g);

  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Field f = random_field(g, rng, g.n() / 2 - 1, 1.0, 0.3);
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(g.size());
    for (int k = -1; k <= top; ++k) sum += lp_project(f, k, bump).values;
    worst = std::max(worst, (sum - f.values).abs().maxCoeff() / std::max(1.0, f.values.abs().maxCoeff()));
  }
  out.push_back({"partition_of_unity", worst <= 1e-12, "max relative error " + format_double(worst)});

  int cases = 0, violations = 0;
  double worst_ratio = 0.0;
  std::uniform_int_distribution<int> level(0, std::max(0, top - 1));
  std::uniform_int_distribution<int> gband(1, 3);
  while (cases < 100) {
    const int gb = gband(rng);
    const int fb = std::max(1, g.n() / 2 - 1 - gb - 1);
    const Field gf = random_field(g, rng, gb, 1.0, 0.5);
    const Field ff = random_field(g, rng, std::min(fb, g.n() / 3), 1.0, 0.2);
    const int k = level(rng);
    const auto r = commutator_check(gf, ff, k, bump);
    if (r.aliased) continue;
    ++cases;
    if (r.lhs > r.rhs) ++violations;
    if (r.rhs > 0.0) worst_ratio = std::max(worst_ratio, r.lhs / r.rhs);
  }
  out.push_back({"commutator_inequality", violations == 0,
                 std::to_string(cases) + " alias-free cases, " + std::to_string(violations) +
                     " violations, max lhs/rhs " + format_double(worst_ratio)});

  const double sigma = 0.5 * cfg.solver.gamma;
  const NormPair bracket = lp_equivalence_bracket(sigma, bump);
  double lo = 1e300, hi = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Field f = random_field(g, rng, g.n() / 2 - 1, 1.0, 0.0);
    const auto p = lp_norm_equivalence(f, sigma, bump);
    lo = std::min(lo, p.lhs / p.rhs);
    hi = std::max(hi, p.lhs / p.rhs);
  }
  const double slack = 1e-12;
  out.push_back({"norm_equivalence", lo >= bracket.lhs * (1 - slack) && hi <= bracket.rhs * (1 + slack),
                 "ratios in [" + format_double(lo) + ", " + format_double(hi) + "], bracket [" +
                     format_double(bracket.lhs) + ", " + format_double(bracket.rhs) + "]"});
  return out;
}

std::vector<CheckLine> kernel_checks(const ExperimentConfig& cfg) {
  const Grid g(cfg.dim, cfg.n);
  std::mt19937_64 rng(cfg.initial.seed);
  std::vector<CheckLine> out;

  const KernelSpec ks = build_ks_kernel(g);
  double ks_err = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Field rho = random_field(g, rng, g.n() / 2 - 1, 1.0, 2.0);
    const SpectralField R = forward(rho);
    const auto grad = apply_kernel(ks, R);
    const SpectralField div = divergence(grad);
    SpectralField expect = R;
    expect.coeffs[0] = 0.0;
    // modes touching the Nyquist plane have no real gradient
    const Eigen::ArrayXcd diff = (div.coeffs - expect.coeffs * g.nyquist_mask());
    ks_err = std::max(ks_err, diff.abs().maxCoeff());
  }
  out.push_back({"keller_segel_inverse", ks_err <= 1e-12, "max coefficient error " + format_double(ks_err)});

  const double a = cfg.kernel.kind == KernelKind::power ? cfg.kernel.a : 0.0;
  const double eps = cfg.kernel.kind == KernelKind::power ? cfg.kernel.eps : 0.2;
  const KernelSpec pk = build_power_kernel(g, a, eps);
  double mean_coeff = 0.0;
  for (const auto& c : pk.components) mean_coeff = std::max(mean_coeff, std::abs(c.coeffs[0]));
  out.push_back({"zero_mean", mean_coeff == 0.0, "max |k=0 coefficient| " + format_double(mean_coeff)});

  const auto samples = kernel_samples(pk);
  double odd = 0.0, peak = 0.0;
  // -x on the node lattice is the same index map as -k on the wavenumber lattice
  const auto& neg = g.negated_index();
  for (const auto& c : samples) {
    peak = std::max(peak, c.values.abs().maxCoeff());
    for (Index i = 0; i < g.size(); ++i) odd = std::max(odd, std::abs(c.values[i] + c.values[neg[i]]));
  }
  out.push_back({"oddness", odd <= 1e-10 * peak, "max |K(x)+K(-x)| / max|K| " + format_double(odd / peak)});

  const Field rho = random_field(g, rng, g.n() / 3, 1.0, 1.0);
  const double shift = 3.25;
  const Field shifted(g, rho.values + shift);
  const auto v1 = apply_kernel(pk, forward(rho));
  const auto v2 = apply_kernel(pk, forward(shifted));
  double shift_err = 0.0;
  for (size_t c = 0; c < v1.size(); ++c) shift_err = std::max(shift_err, (v1[c].coeffs - v2[c].coeffs).abs().maxCoeff());
  out.push_back({"constant_invariance", shift_err <= 1e-12, "max coefficient change " + format_double(shift_err)});

  const double sigma = 0.5 * cfg.solver.gamma;
  const auto lhs = apply_kernel(pk, apply_lambda(forward(rho), sigma, MultiplierConvention::paper_lambda));
  double comm = 0.0, scale = 0.0;
  for (size_t c = 0; c < v1.size(); ++c) {
    const SpectralField rhs = apply_lambda(v1[c], sigma, MultiplierConvention::paper_lambda);
    comm = std::max(comm, (lhs[c].coeffs - rhs.coeffs).abs().maxCoeff());
    scale = std::max(scale, rhs.coeffs.abs().maxCoeff());
  }
  out.push_back({"lambda_commutation", comm <= 1e-12 * std::max(1.0, scale), "max difference " + format_double(comm)});

  if (g.dim() == 2 && eps >= 4.0 / 64.0) {
    // refinement oracle: the same Gaussian bump on n = 64, 128 against n = 256
    InitialSpec bumpspec;
    bumpspec.kind = InitialKind::gaussian;
    bumpspec.mass = 1.0;
    bumpspec.width = 0.07;
    bumpspec.center = {0.03, -0.02, 0.0};
    auto convolve = [&](int n) {
      const Grid gg(2, n);
      return apply_kernel(build_power_kernel(gg, a, eps), make_initial_data(bumpspec, gg));
    };
    const auto ref = convolve(256);
    auto error = [&](int n) {
      const auto v = convolve(n);
      const int stride = 256 / n;
      double sum = 0.0;
      const Grid gg(2, n);
      const Grid gr(2, 256);
      for (Index i = 0; i < gg.size(); ++i) {
        const auto idx = gg.unravel(i);
        const Index j = gr.ravel({idx[0] * stride, idx[1] * stride, 0});
        for (size_t c = 0; c < v.size(); ++c) sum += std::pow(v[c].values[i] - ref[c].values[j], 2);
      }
      return std::sqrt(sum / static_cast<double>(gg.size()));
    };
    const double e64 = error(64), e128 = error(128);
    out.push_back({"refinement", e64 >= 2.0 * e128,
                   "L2 error vs n=256: n=64 " + format_double(e64) + ", n=128 " + format_double(e128) + ", factor " +
                       format_double(e64 / e128)});
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
  ExperimentResult res;
  const fs::path dir = ctx.output_dir.empty() ? cfg.output : ctx.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  auto emit = [&](const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    write_text(p, text);
    res.artifacts.push_back(p);
  };
  json manifest = base_manifest(cfg);
  const Grid g(cfg.dim, cfg.n);

  switch (cfg.kind) {
    case ExperimentKind::run: {
      report(ctx, "run: n=" + std::to_string(cfg.n) + " A=" + format_double(cfg.flow.amplitude));
      const Field rho0 = make_initial_data(cfg.initial, g);
      FlowSpec fs = cfg.flow;
      fs.amplitude = 1.0;
      const VelocityField u = build_flow(fs, g);
      const KernelSpec ks = make_kernel(cfg.kernel, g);
      RunOptions opts;
      opts.keep_final_state = cfg.dump_final;
      const RunRecord rec = run_nonlinear(rho0, u, cfg.flow.amplitude, ks, cfg.solver, opts);
      emit("series.csv", series_csv(rec.series));
      if (cfg.dump_final && rec.final_state) {
        write_field_table(dir / "final_field.txt", {*rec.final_state});
        res.artifacts.push_back(dir / "final_field.txt");
      }
      manifest["amplitude"] = cfg.flow.amplitude;
      manifest["outcome"] = outcome_json(rec);
      if (rec.outcome.blowup)
        manifest["t_star_note"] = "t_star is the time the trigger fired, a lower bound proxy for the blowup time";
      report(ctx, "outcome: " + rec.outcome.label() + " at t=" + format_double(rec.outcome.t_star));
      break;
    }
    case ExperimentKind::sweep_A: {
      AmplitudeProblem prob{make_initial_data(cfg.initial, g), VelocityField(g), make_kernel(cfg.kernel, g), cfg.solver};
      FlowSpec fs = cfg.flow;
      fs.amplitude = 1.0;
      prob.u = build_flow(fs, g);
      report(ctx, "sweep: " + std::to_string(cfg.amplitudes.size()) + " amplitudes on " + std::to_string(ctx.threads) +
                      " thread(s)");
      const ThresholdResult tr = find_threshold_amplitude(prob, cfg.amplitudes, ctx.threads);
      std::string summary = "A,outcome,trigger,t_end,terminal_l2_dist,max_l2_dist,flags\n";
      json runs = json::array();
      for (size_t i = 0; i < tr.amplitudes.size(); ++i) {
        const RunRecord& r = tr.runs[i];
        std::string flags;
        for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
        summary += format_double(tr.amplitudes[i]) + "," + r.outcome.label() + "," +
                   (r.outcome.blowup ? std::string(to_string(r.outcome.trigger)) : "") + "," +
                   format_double(r.outcome.t_star) + "," + format_double(r.last().l2_dist) + "," +
                   format_double(r.max_l2_dist) + "," + flags + "\n";
        emit("series_" + amplitude_tag(tr.amplitudes[i]) + ".csv", series_csv(r.series));
        json o = outcome_json(r);
        o["A"] = tr.amplitudes[i];
        runs.push_back(o);
        report(ctx, "A=" + format_double(tr.amplitudes[i]) + ": " + r.outcome.label());
      }
      emit("summary.csv", summary);
      json bracket;
      bracket["status"] = std::string(to_string(tr.status));
      bracket["A_low"] = tr.a_low ? json(*tr.a_low) : json(nullptr);
      bracket["A_high"] = tr.a_high ? json(*tr.a_high) : json(nullptr);
      manifest["bracket"] = bracket;
      manifest["runs"] = runs;
      manifest["t_star_note"] = "t_end of a blowup row is the time the trigger fired";
      break;
    }
    case ExperimentKind::relax: {
      report(ctx, "relax: " + std::to_string(cfg.amplitudes.size()) + " amplitudes");
      const auto rows = relaxation_ratios(cfg, ctx.threads);
      std::string csv = "A,tau,ratio\n";
      json jr = json::array();
      for (const auto& r : rows) {
        csv += format_double(r.amplitude) + "," + format_double(r.tau) + "," + format_double(r.ratio) + "\n";
        jr.push_back({{"A", r.amplitude}, {"tau", r.tau}, {"ratio", r.ratio}});
      }
      emit("relax.csv", csv);
      manifest["ratios"] = jr;
      break;
    }
    case ExperimentKind::transport_bound: {
      report(ctx, "transport: flow " + std::string(to_string(cfg.flow.family)));
      const TransportResult tr = transport_study(cfg);
      emit("series.csv", series_csv(tr.record.series));
      const bool within = tr.slope <= tr.bound + 1e-10;
      emit("transport.csv", "flow,slope,flow_norm,c_impl,bound,filter_loss,resolution_limited,within_bound\n" +
                                std::string(to_string(cfg.flow.family)) + "," + format_double(tr.slope) + "," +
                                format_double(tr.flow_norm) + "," + format_double(transport_bound_constant) + "," +
                                format_double(tr.bound) + "," + format_double(tr.filter_loss) + "," +
                                (tr.resolution_limited ? "true" : "false") + "," + (within ? "true" : "false") + "\n");
      manifest["transport"] = {{"slope", tr.slope},
                               {"flow_norm", tr.flow_norm},
                               {"c_impl", transport_bound_constant},
                               {"bound", tr.bound},
                               {"filter_loss", tr.filter_loss},
                               {"resolution_limited", tr.resolution_limited},
                               {"within_bound", within}};
      manifest["outcome"] = outcome_json(tr.record);
      break;
    }
    case ExperimentKind::lp_check:
    case ExperimentKind::kernel_check: {
      const auto lines = cfg.kind == ExperimentKind::lp_check ? lp_checks(cfg) : kernel_checks(cfg);
      std::string text;
      json jl = json::array();
      for (const auto& l : lines) {
        text += std::string(l.passed ? "PASS " : "FAIL ") + l.name + ": " + l.detail + "\n";
        jl.push_back({{"name", l.name}, {"passed", l.passed}, {"detail", l.detail}});
        res.checks_passed = res.checks_passed && l.passed;
        report(ctx, std::string(l.passed ? "PASS " : "FAIL ") + l.name);
      }
      emit("report.txt", text);
      manifest["checks"] = jl;
      manifest["passed"] = res.checks_passed;
      break;
    }
  }
  emit("manifest.json", manifest.dump(2) + "\n");
  return res;
}

}  // namespace aggflow
