#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmix/fidelity.hpp"
#include "bmix/fock.hpp"
#include "bmix/meanfield.hpp"

namespace bmix {

struct ConfigError : std::runtime_error {
  std::vector<std::string> issues;
  explicit ConfigError(std::vector<std::string> list)
      : std::runtime_error(join(list)), issues(std::move(list)) {}

 private:
  static std::string join(const std::vector<std::string>& list) {
    std::string s = "invalid configuration:";
    for (const auto& e : list) s += "\n  - " + e;
    return s;
  }
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  GridSpec grid;
  KineticSpec kinetic1, kinetic2;
  CouplingMatrix couplings;
  std::vector<MixtureSize> mixture;
  double dt = 1e-3;
  double horizon = 1.0;
  int stride = 100;
  double dt_meanfield = 1e-4;
  std::vector<double> thetas{0.0, 0.25, 0.5, 0.75};
  int report_k = 1, report_l = 1;
  std::string integrator = "strang";
  int picard_windows_per_unit = 10, picard_iters = 40, picard_quad = 50;
  std::uint64_t seed = 1;
  LanczosOptions lanczos{60, 1e-11};
  std::int64_t state_cap = kDefaultStateCap;
  int workers = 1;
  std::string out_dir = "out";
  std::string psi_spec = "gauss:0.5,0.125,1";
  std::string phi_spec = "gauss:0.25,0.2,0";
  std::map<std::string, std::string> raw;

  double ratio() const { return mixture.front().ratio(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == ',' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::map<std::string, std::string> parse_key_values(std::istream& is,
                                                           std::vector<std::string>& errors) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": empty key or value");
      continue;
    }
    if (kv.count(key)) errors.push_back("duplicate key: " + key);
    kv[key] = value;
  }
  return kv;
}

/// zero | constant:ax[,ay,az] | sine:amp,base (first-axis profile).
inline VectorSampler parse_potential(const std::string& text, double box,
                                     std::vector<std::string>& errors,
                                     const std::string& key) {
  if (text == "zero") return {};
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  std::vector<double> args;
  if (colon != std::string::npos)
    for (const auto& tok : split_list(text.substr(colon + 1))) args.push_back(std::stod(tok));
  if (kind == "constant") {
    std::array<double, 3> v{0, 0, 0};
    for (std::size_t i = 0; i < args.size() && i < 3; ++i) v[i] = args[i];
    if (args.empty()) {
      errors.push_back(key + ": constant potential needs components");
      return {};
    }
    return [v](const std::array<double, 3>&) { return v; };
  }
  if (kind == "sine") {
    const double amp = args.size() > 0 ? args[0] : 0.3;
    const double base = args.size() > 1 ? args[1] : 0.5;
    return [amp, base, box](const std::array<double, 3>& x) {
      return std::array<double, 3>{base + amp * std::sin(2.0 * std::numbers::pi * x[0] / box),
                                   0.0, 0.0};
    };
  }
  errors.push_back(key + ": unknown vector potential '" + text + "'");
  return {};
}

/// gauss:center_frac,width_frac[,mode] | planewave:n1[,n2,n3]
inline Field make_orbital(const GridSpec& g, const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  std::vector<double> args;
  if (colon != std::string::npos)
    for (const auto& tok : split_list(text.substr(colon + 1))) args.push_back(std::stod(tok));
  if (kind == "gauss") {
    const double center = args.size() > 0 ? args[0] : 0.5;
    const double width = args.size() > 1 ? args[1] : 0.15;
    const int mode = args.size() > 2 ? static_cast<int>(args[2]) : 0;
    std::array<double, 3> x0{0, 0, 0};
    for (int a = 0; a < g.d; ++a) x0[a] = center * g.box;
    return gaussian_packet(g, x0, width * g.box, {mode, 0, 0});
  }
  if (kind == "planewave") {
    std::array<int, 3> modes{0, 0, 0};
    for (std::size_t i = 0; i < args.size() && i < 3; ++i)
      modes[i] = static_cast<int>(args[i]);
    return plane_wave(g, modes);
  }
  throw std::invalid_argument("unknown orbital profile '" + text + "'");
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

}  // namespace detail

/// Parses and validates a harness configuration. Every violated assumption
/// is reported by name; nothing is silently corrected.
inline RunConfig validate_config(std::istream& is) {
  std::vector<std::string> errors;
  auto kv = detail::parse_key_values(is, errors);
  RunConfig cfg;
  cfg.raw = kv;

  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    const std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto num = [&](const std::string& key, double dflt) {
    const auto v = take(key);
    if (!v) return dflt;
    try {
      return std::stod(*v);
    } catch (...) {
      errors.push_back(key + ": not a number: " + *v);
      return dflt;
    }
  };
  auto integer = [&](const std::string& key, std::int64_t dflt) {
    return static_cast<std::int64_t>(num(key, static_cast<double>(dflt)));
  };
  auto text = [&](const std::string& key, const std::string& dflt) {
    const auto v = take(key);
    return v ? *v : dflt;
  };

  cfg.grid.d = static_cast<int>(integer("grid.d", 1));
  cfg.grid.m = static_cast<int>(integer("grid.M", 8));
  cfg.grid.box = num("grid.L", 2.0 * std::numbers::pi);
  try {
    cfg.grid.validate();
  } catch (const std::exception& e) {
    errors.push_back(e.what());
  }

  auto parse_kind = [&](const std::string& key, KineticSpec& spec, int species) {
    const std::string kind = text(key + ".kind", "magnetic");
    if (kind == "magnetic")
      spec.kind = KineticKind::MagneticNonrelativistic;
    else if (kind == "semirelativistic")
      spec.kind = KineticKind::Semirelativistic;
    else
      errors.push_back(key + ".kind: unknown kinetic kind '" + kind + "'");
    spec.mass = num(key + ".mass", 1.0);
    if (!(spec.mass > 0.0)) errors.push_back(key + ".mass: must be positive");
    const std::string pot = text(key + ".A", "zero");
    spec.vector_potential = detail::parse_potential(pot, cfg.grid.box, errors, key + ".A");
    if (spec.kind == KineticKind::Semirelativistic && spec.vector_potential)
      errors.push_back(key + ": (RS) forbids a vector potential in the semi-relativistic case");
    (void)species;
  };
  parse_kind("kinetic1", cfg.kinetic1, 1);
  parse_kind("kinetic2", cfg.kinetic2, 2);

  cfg.couplings.lambda11 = num("coupling.lambda11", 0.0);
  cfg.couplings.lambda22 = num("coupling.lambda22", 0.0);
  cfg.couplings.lambda12 = num("coupling.lambda12", 0.0);
  cfg.couplings.mu11 = num("coupling.mu11", 0.0);
  cfg.couplings.mu22 = num("coupling.mu22", 0.0);
  cfg.couplings.mu12 = num("coupling.mu12", 0.0);
  const std::string eps = text("coupling.epsilon", "auto");
  cfg.couplings.epsilon = eps == "auto" ? 2.0 * cfg.grid.spacing() : std::stod(eps);
  try {
    cfg.couplings.validate();
  } catch (const std::exception& e) {
    errors.push_back(e.what());
  }

  // Mixture pairs like "1x1 2x2 3x3"; all must share R^2 = N1/N2 exactly.
  const std::string pairs = text("mixture.pairs", "1x1");
  for (const auto& tok : detail::split_list(pairs)) {
    const auto x = tok.find('x');
    if (x == std::string::npos) {
      errors.push_back("mixture.pairs: expected N1xN2, got '" + tok + "'");
      continue;
    }
    try {
      MixtureSize mix{std::stoll(tok.substr(0, x)), std::stoll(tok.substr(x + 1))};
      mix.validate();
      cfg.mixture.push_back(mix);
    } catch (const std::exception&) {
      errors.push_back("mixture.pairs: bad pair '" + tok + "'");
    }
  }
  if (cfg.mixture.empty()) errors.push_back("mixture.pairs: at least one pair required");
  for (std::size_t i = 1; i < cfg.mixture.size(); ++i)
    if (!same_ratio(cfg.mixture[0], cfg.mixture[i]))
      errors.push_back("mixture.pairs: (MF) requires one fixed R, but " +
                       std::to_string(cfg.mixture[i].n1) + "x" +
                       std::to_string(cfg.mixture[i].n2) + " breaks it");

  cfg.state_cap = integer("state_cap", kDefaultStateCap);
  for (const auto& mix : cfg.mixture) {
    const auto dim = state_dimension(cfg.grid, mix);
    if (dim < 0 || dim > cfg.state_cap)
      errors.push_back("mixture " + std::to_string(mix.n1) + "x" + std::to_string(mix.n2) +
                       " exceeds the state-vector cap");
  }

  cfg.dt = num("time.dt", 1e-3);
  cfg.horizon = num("time.T", 1.0);
  cfg.stride = static_cast<int>(integer("time.stride", 100));
  cfg.dt_meanfield = num("time.dt_meanfield", 1e-4);
  if (!(cfg.dt > 0.0)) errors.push_back("time.dt: must be positive");
  if (!(cfg.horizon > 0.0)) errors.push_back("time.T: must be positive");
  if (cfg.stride < 1) errors.push_back("time.stride: must be >= 1");
  if (!(cfg.dt_meanfield > 0.0)) errors.push_back("time.dt_meanfield: must be positive");

  cfg.thetas.clear();
  for (const auto& tok : detail::split_list(text("theta.list", "0 0.25 0.5 0.75"))) {
    try {
      const double th = std::stod(tok);
      if (th < 0.0 || th > 1.0) errors.push_back("theta.list: theta must lie in [0,1]");
      cfg.thetas.push_back(th);
    } catch (...) {
      errors.push_back("theta.list: not a number: " + tok);
    }
  }
  if (cfg.thetas.empty()) errors.push_back("theta.list: at least one value required");

  cfg.report_k = static_cast<int>(integer("report.k", 1));
  cfg.report_l = static_cast<int>(integer("report.l", 1));
  for (const auto& mix : cfg.mixture)
    if (cfg.report_k > mix.n1 || cfg.report_l > mix.n2)
      errors.push_back("report.k/l exceed a mixture pair");

  cfg.integrator = text("integrator", "strang");
  if (cfg.integrator != "strang" && cfg.integrator != "picard")
    errors.push_back("integrator: must be strang or picard");
  cfg.picard_windows_per_unit = static_cast<int>(integer("picard.windows_per_unit", 10));
  cfg.picard_iters = static_cast<int>(integer("picard.n_iter", 40));
  cfg.picard_quad = static_cast<int>(integer("picard.n_quad", 50));

  cfg.seed = static_cast<std::uint64_t>(integer("seed", 1));
  cfg.lanczos.max_dim = static_cast<int>(integer("lanczos.max_dim", 60));
  cfg.lanczos.tol = num("lanczos.tol", 1e-11);
  cfg.workers = static_cast<int>(integer("workers", 1));
  if (cfg.workers < 1) errors.push_back("workers: must be >= 1");
  cfg.out_dir = text("output.dir", "out");
  cfg.psi_spec = text("initial.psi", cfg.psi_spec);
  cfg.phi_spec = text("initial.phi", cfg.phi_spec);
  try {
    detail::make_orbital(cfg.grid, cfg.psi_spec);
    detail::make_orbital(cfg.grid, cfg.phi_spec);
  } catch (const std::exception& e) {
    errors.push_back(e.what());
  }

  // (SR) gate for semi-relativistic runs.
  if (cfg.kinetic1.kind == KineticKind::Semirelativistic ||
      cfg.kinetic2.kind == KineticKind::Semirelativistic) {
    const auto sr = check_sr_stability(cfg.couplings);
    if (!sr.pass) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", sr.margin);
      errors.push_back(std::string("(SR) stability fails, margin ") + buf);
    }
  }

  for (const auto& [key, value] : kv) errors.push_back("unknown key: " + key);
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

inline RunConfig validate_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError({"cannot open config file: " + path});
  return validate_config(is);
}

inline constexpr const char* kCsvHeader =
    "t,N1,N2,theta,trace_norm,hs_norm,a1,a2,est_a_bound,thm23_bound,A_N,B_N,energy_drift";

struct SweepRow {
  FidelityReport report;
  double energy_drift = 0.0;
};

struct PointResult {
  MixtureSize mixture;
  std::string status = "ok";  // or the failure message
  std::vector<SweepRow> rows;
  std::int64_t hamiltonian_applies = 0;
};

struct SweepResult {
  RunConfig config;
  std::vector<PointResult> points;
};

namespace detail {

inline void advance_mean_field(const HartreeSystem& sys, HartreeState& mf, double span,
                               const RunConfig& cfg) {
  if (cfg.integrator == "picard") {
    const int windows =
        std::max(1, static_cast<int>(std::ceil(span * cfg.picard_windows_per_unit)));
    mf = sys.picard_evolve(mf, span, windows, cfg.picard_iters, cfg.picard_quad);
  } else {
    const auto steps = std::max<std::int64_t>(1, std::llround(span / cfg.dt_meanfield));
    const double dt = span / static_cast<double>(steps);
    for (std::int64_t i = 0; i < steps; ++i) mf = sys.strang_step(mf, dt, cfg.lanczos);
  }
}

inline PointResult run_point(const RunConfig& cfg, const MixtureSize& mix) {
  PointResult out;
  out.mixture = mix;
  try {
    HamiltonianSpec hspec{cfg.kinetic1, cfg.kinetic2, cfg.couplings, mix};
    HamiltonianOperator ham(cfg.grid, hspec, cfg.state_cap);
    HartreeSystem sys(cfg.grid, cfg.kinetic1, cfg.kinetic2, cfg.couplings, cfg.ratio());
    const KineticOperator kin1(cfg.grid, cfg.kinetic1);
    const KineticOperator kin2(cfg.grid, cfg.kinetic2);

    Field psi = make_orbital(cfg.grid, cfg.psi_spec);
    Field phi = make_orbital(cfg.grid, cfg.phi_spec);
    auto state = product_state(psi, phi, mix, cfg.state_cap);
    HartreeState mf{psi, phi, 0.0};
    const double e0 = ham.energy(state);

    const auto steps = std::max<std::int64_t>(1, std::llround(cfg.horizon / cfg.dt));
    auto sample = [&](double t) {
      auto reports = fidelity_reports(state, mf.psi, mf.phi, kin1, kin2, cfg.report_k,
                                      cfg.report_l, cfg.thetas);
      const double drift = std::abs(ham.energy(state) - e0) / std::max(1e-300, std::abs(e0));
      for (auto& r : reports) {
        r.t = t;
        out.rows.push_back({std::move(r), drift});
      }
    };

    sample(0.0);
    for (std::int64_t step = 1; step <= steps; ++step) {
      state = ham.propagate(state, cfg.dt, 1, cfg.lanczos);
      advance_mean_field(sys, mf, cfg.dt, cfg);
      if (step % cfg.stride == 0 || step == steps) sample(step * cfg.dt);
    }
    out.hamiltonian_applies = ham.apply_count();
  } catch (const std::exception& e) {
    out.status = e.what();
    out.rows.clear();
  }
  return out;
}

}  // namespace detail

/// Runs every mixture point of a validated config; failures abort the
/// point, not the sweep. Deterministic given the config.
inline SweepResult run_sweep(const RunConfig& cfg) {
  SweepResult result;
  result.config = cfg;
  result.points.resize(cfg.mixture.size());
  if (cfg.workers <= 1) {
    for (std::size_t i = 0; i < cfg.mixture.size(); ++i)
      result.points[i] = detail::run_point(cfg, cfg.mixture[i]);
  } else {
    std::vector<std::future<PointResult>> futures;
    futures.reserve(cfg.mixture.size());
    for (const auto& mix : cfg.mixture)
      futures.push_back(std::async(std::launch::async,
                                   [&cfg, mix] { return detail::run_point(cfg, mix); }));
    for (std::size_t i = 0; i < futures.size(); ++i) result.points[i] = futures[i].get();
  }
  return result;
}

inline std::string sweep_csv(const SweepResult& result) {
  std::string csv = std::string(kCsvHeader) + "\n";
  for (const auto& point : result.points) {
    for (const auto& row : point.rows) {
      const auto& r = row.report;
      csv += detail::fmt_double(r.t) + "," + std::to_string(r.n1) + "," +
             std::to_string(r.n2) + "," + detail::fmt_double(r.theta) + "," +
             detail::fmt_double(r.trace_norm_w) + "," + detail::fmt_double(r.hs_norm_w) +
             "," + detail::fmt_double(r.a1) + "," + detail::fmt_double(r.a2) + "," +
             detail::fmt_double(r.est_a_bound) + "," + detail::fmt_double(r.thm23_bound) +
             "," + detail::fmt_double(r.a_gap) + "," + detail::fmt_double(r.b_gap) + "," +
             detail::fmt_double(row.energy_drift) + "\n";
    }
  }
  return csv;
}

inline nlohmann::json sweep_summary(const SweepResult& result) {
  nlohmann::json j;
  j["config"] = result.config.raw;
  j["points"] = nlohmann::json::array();
  for (const auto& point : result.points) {
    nlohmann::json p;
    p["N1"] = point.mixture.n1;
    p["N2"] = point.mixture.n2;
    p["status"] = point.status;
    p["samples"] = point.rows.size();
    p["hamiltonian_applies"] = point.hamiltonian_applies;
    std::size_t violations = 0;
    for (const auto& row : point.rows) violations += row.report.violations.size();
    p["violations"] = violations;
    if (!point.rows.empty()) {
      p["final_energy_drift"] = point.rows.back().energy_drift;
      p["reports"] = nlohmann::json::array();
      for (const auto& row : point.rows) p["reports"].push_back(row.report);
    }
    j["points"].push_back(std::move(p));
  }
  return j;
}

/// Writes sweep.csv and summary.json under the configured output directory.
inline void write_sweep_outputs(const SweepResult& result) {
  const std::filesystem::path dir(result.config.out_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "sweep.csv", std::ios::binary);
    os << sweep_csv(result);
  }
  {
    std::ofstream os(dir / "summary.json", std::ios::binary);
    os << sweep_summary(result).dump(2) << "\n";
  }
}

struct RateFit {
  std::string quantity;
  double t = 0.0;
  double theta = 0.0;
  int points = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  double predicted = std::numeric_limits<double>::quiet_NaN();
  double deviation = std::numeric_limits<double>::quiet_NaN();
  bool floored = false;
};

inline constexpr double kLogFitFloor = 1e-14;

/// Least-squares slope of log(quantity) against log(N1) at fixed t, theta.
inline RateFit fit_rate(const std::string& csv_text, const std::string& quantity, double t,
                        double theta) {
  std::istringstream is(csv_text);
  std::string header;
  if (!std::getline(is, header)) throw NumericalError("fit: empty csv");
  const auto cols = detail::split_list([&] {
    std::string h = header;
    for (auto& c : h)
      if (c == ',') c = ' ';
    return h;
  }());

  auto col_index = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int tcol = col_index("t");
  const int n1col = col_index("N1");
  const int thcol = col_index("theta");
  const bool sum_mode = quantity == "a_sum";
  const int qcol = sum_mode ? col_index("a1") : col_index(quantity);
  const int q2col = sum_mode ? col_index("a2") : -1;
  if (tcol < 0 || n1col < 0 || thcol < 0 || qcol < 0 || (sum_mode && q2col < 0))
    throw NumericalError("fit: unknown quantity column '" + quantity + "'");

  RateFit fit;
  fit.quantity = quantity;
  fit.t = t;
  fit.theta = theta;

  std::map<std::int64_t, double> by_n1;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    fields.push_back(cur);
    if (fields.size() != cols.size()) continue;
    if (std::abs(std::stod(fields[tcol]) - t) > 1e-9) continue;
    if (std::abs(std::stod(fields[thcol]) - theta) > 1e-9) continue;
    double q = std::stod(fields[qcol]);
    if (sum_mode) q += std::stod(fields[q2col]);
    by_n1[std::stoll(fields[n1col])] = q;
  }

  fit.points = static_cast<int>(by_n1.size());
  if (fit.points < 3)
    throw NumericalError("fit: need >= 3 mixture points at the requested t, found " +
                         std::to_string(fit.points));

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [n1, q] : by_n1) {
    double qq = q;
    if (qq < kLogFitFloor) {
      qq = kLogFitFloor;
      fit.floored = true;
    }
    const double x = std::log(static_cast<double>(n1));
    const double y = std::log(qq);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = fit.points;
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss = 0.0;
  for (const auto& [n1, q] : by_n1) {
    const double x = std::log(static_cast<double>(n1));
    const double y = std::log(std::max(q, kLogFitFloor));
    const double r = y - (fit.slope * x + fit.intercept);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);

  if (quantity == "trace_norm" || quantity == "hs_norm")
    fit.predicted = -(1.0 - theta) / 2.0;
  else if (quantity == "a1" || quantity == "a2" || quantity == "a_sum")
    fit.predicted = -1.0;
  if (std::isfinite(fit.predicted)) fit.deviation = fit.slope - fit.predicted;
  return fit;
}

inline RateFit fit_rate_file(const std::string& csv_path, const std::string& quantity,
                             double t, double theta) {
  std::ifstream is(csv_path, std::ios::binary);
  if (!is) throw NumericalError("fit: cannot open " + csv_path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return fit_rate(ss.str(), quantity, t, theta);
}

/// Emits gnuplot scripts referencing the sweep outputs; no rendering.
inline std::vector<std::string> emit_plots(const std::string& report_dir) {
  const std::filesystem::path dir(report_dir);
  const auto csv = dir / "sweep.csv";
  if (!std::filesystem::exists(csv))
    throw NumericalError("plots: missing expected input " + csv.string());

  // Final sample time and the theta list, read back from the CSV.
  double t_final = 0.0;
  std::vector<double> thetas;
  {
    std::ifstream is(csv);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      const auto c1 = line.find(',');
      if (c1 == std::string::npos) continue;
      t_final = std::max(t_final, std::stod(line.substr(0, c1)));
      auto pos = c1;
      for (int skip = 0; skip < 2 && pos != std::string::npos; ++skip)
        pos = line.find(',', pos + 1);
      if (pos == std::string::npos) continue;
      const double th = std::stod(line.substr(pos + 1));
      if (std::find_if(thetas.begin(), thetas.end(), [th](double x) {
            return std::abs(x - th) < 1e-12;
          }) == thetas.end())
        thetas.push_back(th);
    }
  }

  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& body) {
    std::ofstream os(dir / name, std::ios::binary);
    os << body;
    written.push_back((dir / name).string());
  };

  {
    std::ostringstream s;
    s << "# log-log weighted trace norm against N1 at the final sample time\n"
      << "set datafile separator ','\n"
      << "set logscale xy\nset xlabel 'N1'\nset ylabel 'trace norm'\n"
      << "set key left bottom\n"
      << "tf = " << detail::fmt_double(t_final) << "\n"
      << "plot \\\n";
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      s << "  'sweep.csv' using 2:((abs($1-tf)<1e-9 && abs($4-" << detail::fmt_double(thetas[i])
        << ")<1e-9) ? $5 : 1/0) with linespoints title 'theta=" << thetas[i] << "'";
      s << (i + 1 < thetas.size() ? ", \\\n" : "\n");
    }
    emit("plot_norms.gp", s.str());
  }
  {
    std::ostringstream s;
    s << "# depletion functionals against time, one curve per mixture point\n"
      << "set datafile separator ','\n"
      << "set xlabel 't'\nset ylabel 'a1 + a2'\nset key left top\n"
      << "plot 'sweep.csv' using 1:(abs($4-" << detail::fmt_double(thetas.front())
      << ")<1e-9 ? $7+$8 : 1/0):2 with points palette title 'a1+a2 by N1'\n";
    emit("plot_pickl.gp", s.str());
  }
  {
    std::ostringstream s;
    s << "# relative energy drift of the exact propagation\n"
      << "set datafile separator ','\n"
      << "set xlabel 't'\nset ylabel 'relative energy drift'\nset logscale y\n"
      << "plot 'sweep.csv' using 1:($13 > 0 ? $13 : 1e-18):2 with points palette title "
         "'drift by N1'\n";
    emit("plot_energy.gp", s.str());
  }
  return written;
}

}  // namespace bmix
