#include "wk/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "wk/capacity.hpp"
#include "wk/error.hpp"
#include "wk/fit.hpp"
#include "wk/spectral.hpp"

namespace fs = std::filesystem;

namespace wk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

const char* q_method_name(QMethod m) {
  switch (m) {
    case QMethod::Auto:
      return "auto";
    case QMethod::General:
      return "general";
    case QMethod::Shortcut:
      return "shortcut";
  }
  return "?";
}

// ---------------------------------------------------------------- bundled configs

const char* kCone = R"json({
  "schema_version": 1,
  "name": "example-2.1",
  "description": "exterior of a cone, b = |x|^(alpha-p): bounded q and logarithmic decay rate",
  "domain": {"kind": "ConeComplement", "n": 2, "R": 1.0, "params": {"k1": 1.0}},
  "coefficient": {"kind": "power_law", "k2": 1.0, "l": -0.5},
  "exponents": {"p": 2.0, "alpha": 1.5},
  "method": {"theta": 2.0, "eps": 0.5, "delta": 0.1, "nu_margin": 1.0, "k_grid": [1.0]},
  "ladder": {"r_min": 0.01, "R": 1.0, "rungs": 12},
  "estimates": ["min-rational", "root-rational", "diam-rational", "linear-rational-capacity"],
  "catalog": "cone-complement",
  "pde": {"cells_per_radius": 160, "boundary": {"kind": "first_mode"}}
})json";

const char* kCusp = R"json({
  "schema_version": 1,
  "name": "example-2.2",
  "description": "two-sided horn |y| < x^2 with b = |x|^l at l = alpha - p + 1 - s",
  "domain": {"kind": "PowerCusp", "n": 2, "R": 1.0, "params": {"k1": 1.0, "s": 2.0}},
  "coefficient": {"kind": "power_law", "k2": 1.0, "l": -1.5},
  "exponents": {"p": 2.0, "alpha": 1.5},
  "method": {"theta": 2.0, "eps": 0.5, "delta": 0.1, "nu_margin": 1.0, "k_grid": [1.0]},
  "ladder": {"r_min": 0.001, "R": 0.05, "rungs": 10},
  "estimates": ["diam-rational", "min-rational"],
  "catalog": "power-cusp"
})json";

const char* kCuspCritical = R"json({
  "schema_version": 1,
  "name": "example-2.3",
  "description": "two-sided horn |y| < x^2 with alpha = p - 1 and b = |x|^(-s)",
  "domain": {"kind": "PowerCusp", "n": 2, "R": 1.0, "params": {"k1": 1.0, "s": 2.0}},
  "coefficient": {"kind": "power_law", "k2": 1.0, "l": -2.0},
  "exponents": {"p": 2.0, "alpha": 1.0},
  "method": {"theta": 2.0, "eps": 0.5, "delta": 0.1, "nu_margin": 1.0, "k_grid": [0.5, 1.0, 2.0]},
  "ladder": {"r_min": 0.001, "R": 0.05, "rungs": 10},
  "estimates": ["diam-exponential", "min-exponential"],
  "catalog": "power-cusp-critical"
})json";

const char* kSector = R"json({
  "schema_version": 1,
  "name": "sector",
  "description": "quarter plane, p = 2, b = 0: harmonic solution r^2 sin(2 phi) against the bound curves",
  "domain": {"kind": "Sector", "n": 2, "R": 1.0, "params": {"angle": 1.5707963267948966}},
  "coefficient": {"kind": "zero"},
  "exponents": {"p": 2.0, "alpha": 2.0},
  "method": {"theta": 2.0, "eps": 0.5, "delta": 0.1, "nu_margin": 1.0, "k_grid": [1.0]},
  "ladder": {"r_min": 0.01, "R": 1.0, "rungs": 12},
  "estimates": ["linear-rational-capacity", "min-rational"],
  "pde": {"cells_per_radius": 200, "boundary": {"kind": "first_mode"}}
})json";

}  // namespace

const std::vector<BundledExample>& bundled_examples() {
  static const std::vector<BundledExample> list = {
      {"example-2.1", "cone complement, bounded q, logarithmic decay", kCone},
      {"example-2.2", "power cusp s = 2, critical l, logarithmic decay", kCusp},
      {"example-2.3", "power cusp s = 2, alpha = p - 1, f(r) = r^(1-s)", kCuspCritical},
      {"sector", "quarter plane harmonic case with PDE verification", kSector},
  };
  return list;
}

const BundledExample* find_bundled(const std::string& name) {
  for (const auto& e : bundled_examples())
    if (name == e.name) return &e;
  return nullptr;
}

const char* to_string(Example e) {
  switch (e) {
    case Example::ConeComplement:
      return "cone-complement";
    case Example::PowerCusp:
      return "power-cusp";
    case Example::PowerCuspCritical:
      return "power-cusp-critical";
  }
  return "?";
}

std::optional<Example> example_from_string(const std::string& s) {
  for (Example e : {Example::ConeComplement, Example::PowerCusp, Example::PowerCuspCritical})
    if (s == to_string(e)) return e;
  return std::nullopt;
}

// ---------------------------------------------------------------- config

namespace {

void only_keys(const nlohmann::json& doc, const std::string& where, std::initializer_list<const char*> keys) {
  if (!doc.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : doc.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError(where + ": unknown field '" + k + "'");
  }
}

const nlohmann::json& need(const nlohmann::json& doc, const std::string& where, const char* key) {
  if (!doc.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  return doc.at(key);
}

template <class T>
T get(const nlohmann::json& v, const std::string& where) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": wrong type");
  }
}

ExampleParams example_params(const ExperimentConfig& c) {
  ExampleParams x;
  x.p = c.p;
  x.alpha = c.alpha;
  x.n = c.domain.dim();
  x.s = c.domain.kind() == DomainKind::PowerCusp ? c.domain.param("s") : 1.0;
  x.l = c.coefficient.l();
  x.sigma = c.coefficient.sigma();
  x.log_form = c.coefficient.kind() == CoefficientKind::PowerLog;
  return x;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& doc) {
  only_keys(doc, "config",
            {"schema_version", "name", "description", "domain", "coefficient", "exponents", "method",
             "ladder", "resolution", "estimates", "pde", "catalog", "law_checks", "seed"});
  ExperimentConfig c;
  c.schema_version = get<int>(need(doc, "config", "schema_version"), "schema_version");
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("schema_version " + std::to_string(c.schema_version) + " is not supported (expected " +
                      std::to_string(kSchemaVersion) + ")");
  c.name = doc.contains("name") ? get<std::string>(doc.at("name"), "name") : "experiment";
  c.description = doc.contains("description") ? get<std::string>(doc.at("description"), "description") : "";

  try {
    c.domain = domain_from_json(need(doc, "config", "domain"));
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  }
  try {
    c.coefficient =
        doc.contains("coefficient") ? Coefficient::from_json(doc.at("coefficient")) : Coefficient::zero();
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("coefficient: ") + e.what());
  }

  const auto& ex = need(doc, "config", "exponents");
  only_keys(ex, "exponents", {"p", "alpha"});
  c.p = get<double>(need(ex, "exponents", "p"), "exponents.p");
  c.alpha = get<double>(need(ex, "exponents", "alpha"), "exponents.alpha");

  if (doc.contains("method")) {
    const auto& m = doc.at("method");
    only_keys(m, "method", {"theta", "eps", "delta", "nu_margin", "k_grid", "q_method"});
    c.theta = m.contains("theta") ? get<double>(m.at("theta"), "method.theta") : c.theta;
    c.eps = m.contains("eps") ? get<double>(m.at("eps"), "method.eps") : c.eps;
    c.delta = m.contains("delta") ? get<double>(m.at("delta"), "method.delta") : c.delta;
    c.nu_margin = m.contains("nu_margin") ? get<double>(m.at("nu_margin"), "method.nu_margin") : c.nu_margin;
    if (m.contains("k_grid")) c.k_grid = get<std::vector<double>>(m.at("k_grid"), "method.k_grid");
    if (m.contains("q_method")) {
      const auto s = get<std::string>(m.at("q_method"), "method.q_method");
      if (s == "auto") c.q_method = QMethod::Auto;
      else if (s == "general") c.q_method = QMethod::General;
      else if (s == "shortcut") c.q_method = QMethod::Shortcut;
      else throw ConfigError("method.q_method: expected auto, general or shortcut");
    }
  }
  try {
    make_exponents(c.p, c.alpha, c.domain.dim(), c.theta, c.eps, c.delta, c.nu_margin);
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("exponents/method: ") + e.what());
  }
  if (c.k_grid.empty()) throw ConfigError("method.k_grid: must not be empty");
  for (double k : c.k_grid)
    if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("method.k_grid: values must be positive");

  const auto& lad = need(doc, "config", "ladder");
  only_keys(lad, "ladder", {"r_min", "R", "rungs"});
  c.ladder.r_min = get<double>(need(lad, "ladder", "r_min"), "ladder.r_min");
  c.ladder.R = lad.contains("R") ? get<double>(lad.at("R"), "ladder.R") : c.domain.R();
  c.ladder.rungs = get<int>(need(lad, "ladder", "rungs"), "ladder.rungs");
  if (!(c.ladder.r_min > 0.0 && c.ladder.r_min < c.ladder.R))
    throw ConfigError("ladder: requires 0 < r_min < R");
  if (c.ladder.R > c.domain.R() * (1.0 + 1e-12)) throw ConfigError("ladder: R exceeds the domain radius");
  if (c.ladder.rungs < 3) throw ConfigError("ladder: at least 3 rungs are needed");

  if (doc.contains("resolution")) {
    const auto& r = doc.at("resolution");
    only_keys(r, "resolution", {"h_ang", "capacity_nodes", "cone_nodes", "norm_nodes", "mu_nodes"});
    auto& s = c.resolution;
    s.h_ang = r.contains("h_ang") ? get<double>(r.at("h_ang"), "resolution.h_ang") : s.h_ang;
    s.capacity_nodes =
        r.contains("capacity_nodes") ? get<int>(r.at("capacity_nodes"), "resolution.capacity_nodes") : s.capacity_nodes;
    s.cone_nodes = r.contains("cone_nodes") ? get<int>(r.at("cone_nodes"), "resolution.cone_nodes") : s.cone_nodes;
    s.norm_nodes = r.contains("norm_nodes") ? get<int>(r.at("norm_nodes"), "resolution.norm_nodes") : s.norm_nodes;
    s.mu_nodes = r.contains("mu_nodes") ? get<int>(r.at("mu_nodes"), "resolution.mu_nodes") : s.mu_nodes;
    if (!(s.h_ang > 0.0 && s.h_ang <= 1.0)) throw ConfigError("resolution.h_ang: must lie in (0, 1]");
    if (s.capacity_nodes < 4 || s.cone_nodes < 4 || s.norm_nodes < 2 || s.mu_nodes < 2)
      throw ConfigError("resolution: node counts are too small");
  }

  if (doc.contains("estimates")) {
    for (const auto& e : doc.at("estimates")) {
      const auto name = get<std::string>(e, "estimates");
      const auto id = estimate_from_string(name);
      if (!id) throw ConfigError("estimates: unknown id '" + name + "'");
      try {
        check_regime(*id, c.p, c.alpha);
      } catch (const RegimeError& err) {
        throw ConfigError(std::string("estimates: ") + err.what());
      }
      if (std::find(c.estimates.begin(), c.estimates.end(), *id) == c.estimates.end()) c.estimates.push_back(*id);
    }
  }

  if (doc.contains("pde")) {
    const auto& pd = doc.at("pde");
    only_keys(pd, "pde", {"cells_per_radius", "boundary", "forcing", "dump_solution"});
    if (c.domain.dim() != 2) throw ConfigError("pde: only two-dimensional domains can be solved");
    if (c.domain.kind() == DomainKind::CustomOracle) throw ConfigError("pde: custom domains are not supported");
    PdeSpec s;
    s.cells_per_radius =
        pd.contains("cells_per_radius") ? get<int>(pd.at("cells_per_radius"), "pde.cells_per_radius") : 200;
    if (s.cells_per_radius < 8) throw ConfigError("pde.cells_per_radius: at least 8");
    try {
      if (pd.contains("boundary")) s.boundary = BoundaryData::from_json(pd.at("boundary"));
    } catch (const PreconditionError& e) {
      throw ConfigError(std::string("pde.boundary: ") + e.what());
    }
    s.forcing = pd.contains("forcing") ? get<double>(pd.at("forcing"), "pde.forcing") : 0.0;
    if (!(s.forcing >= 0.0)) throw ConfigError("pde.forcing: must be non-negative");
    s.dump_solution = pd.contains("dump_solution") && get<bool>(pd.at("dump_solution"), "pde.dump_solution");
    c.pde = s;
  }

  if (doc.contains("catalog")) {
    const auto s = get<std::string>(doc.at("catalog"), "catalog");
    c.catalog = example_from_string(s);
    if (!c.catalog) throw ConfigError("catalog: unknown example '" + s + "'");
    const bool cone = *c.catalog == Example::ConeComplement;
    if (cone && c.domain.kind() != DomainKind::ConeComplement)
      throw ConfigError("catalog: cone-complement needs a ConeComplement domain");
    if (!cone && c.domain.kind() != DomainKind::PowerCusp)
      throw ConfigError("catalog: the cusp examples need a PowerCusp domain");
  }
  c.law_checks = doc.contains("law_checks") ? get<int>(doc.at("law_checks"), "law_checks") : 0;
  if (c.law_checks < 0) throw ConfigError("law_checks: must be non-negative");
  c.seed = doc.contains("seed") ? get<std::uint64_t>(doc.at("seed"), "seed") : 0;
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

ExperimentConfig load_config(const std::string& path_or_name) {
  std::ifstream in(path_or_name);
  if (!in) {
    if (const auto* b = find_bundled(path_or_name)) return parse_config_text(b->json);
    throw ConfigError("cannot read config '" + path_or_name + "' (not a file or bundled example)");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json est = nlohmann::json::array();
  for (Estimate e : estimates) est.push_back(to_string(e));
  nlohmann::json j = {
      {"schema_version", schema_version},
      {"name", name},
      {"description", description},
      {"domain", domain.to_json()},
      {"coefficient", coefficient.to_json()},
      {"exponents", {{"p", p}, {"alpha", alpha}}},
      {"method",
       {{"theta", theta},
        {"eps", eps},
        {"delta", delta},
        {"nu_margin", nu_margin},
        {"k_grid", k_grid},
        {"q_method", q_method_name(q_method)}}},
      {"ladder", {{"r_min", ladder.r_min}, {"R", ladder.R}, {"rungs", ladder.rungs}}},
      {"resolution",
       {{"h_ang", resolution.h_ang},
        {"capacity_nodes", resolution.capacity_nodes},
        {"cone_nodes", resolution.cone_nodes},
        {"norm_nodes", resolution.norm_nodes},
        {"mu_nodes", resolution.mu_nodes}}},
      {"estimates", est},
      {"law_checks", law_checks},
      {"seed", seed}};
  if (pde)
    j["pde"] = {{"cells_per_radius", pde->cells_per_radius},
                {"boundary", pde->boundary.to_json()},
                {"forcing", pde->forcing},
                {"dump_solution", pde->dump_solution}};
  if (catalog) j["catalog"] = to_string(*catalog);
  return j;
}

// ---------------------------------------------------------------- run

bool RunResult::ok() const {
  for (const auto& s : stages)
    if (s.status == "failed") return false;
  return true;
}

namespace {

class Bundle {
 public:
  explicit Bundle(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  std::ofstream open(const std::string& name) {
    files_.insert(name);
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw Error("cannot write " + (dir_ / name).string());
    return os;
  }
  void json(const std::string& name, const nlohmann::json& j) { open(name) << j.dump(2) << '\n'; }
  const std::set<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::set<std::string> files_;
};

template <class F>
void stage(RunResult& res, const std::string& name, bool wanted, F&& body) {
  StageRecord rec{name, "ok", ""};
  if (!wanted) {
    rec.status = "skipped";
  } else {
    try {
      body();
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.error = e.what();
    }
  }
  res.stages.push_back(rec);
}

double profile_slope(const Profile& p) {
  std::vector<double> r, v;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!p.missing(i) && p.value(i) > 0.0) {
      r.push_back(p.ladder()[i]);
      v.push_back(p.value(i));
    }
  return r.size() >= 2 ? fit_loglog(r, v).slope : kNaN;
}

nlohmann::json profile_stats(const Profile& p, double scale_power) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.missing(i)) continue;
    const double v = p.value(i) * std::pow(p.ladder()[i], scale_power);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++n;
  }
  if (n == 0) return {{"available", 0}};
  return {{"available", n},
          {"slope", num(profile_slope(p))},
          {"scaled_power", scale_power},
          {"scaled_min", lo},
          {"scaled_max", hi},
          {"scaled_ratio", num(lo > 0.0 ? hi / lo : kNaN)}};
}

// sup of g over samples of S_R ∩ Omega
double outer_max(const std::function<double(const Point&)>& g, const DomainSpec& dom, double R) {
  const int n = 1 << 14;
  double best = 0.0;
  int best_k = -1;
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * (k + 0.5) / n;
    const Point x{R * std::cos(a), R * std::sin(a), 0.0};
    if (!dom.contains(x)) continue;
    const double v = g(x);
    if (best_k < 0 || v > best) {
      best = v;
      best_k = k;
    }
  }
  if (best_k < 0) return 0.0;
  constexpr double kPhi = 0.6180339887498949;
  const double step = 2.0 * std::numbers::pi / n;
  double lo = step * (best_k - 0.5), hi = step * (best_k + 1.5);
  for (int it = 0; it < 60; ++it) {
    const double a1 = hi - kPhi * (hi - lo), a2 = lo + kPhi * (hi - lo);
    auto val = [&](double a) {
      const Point x{R * std::cos(a), R * std::sin(a), 0.0};
      return dom.contains(x) ? g(x) : 0.0;
    };
    const double v1 = val(a1), v2 = val(a2);
    best = std::max(best, std::max(v1, v2));
    if (v1 < v2) lo = a1;
    else hi = a2;
  }
  return best;
}

// log-log slope of int_r^R f against f(r) - f(R) over the lower half of the ladder
double catalog_slope(const EstimateReport& rep, const std::function<double(double)>& f) {
  const double fR = f(rep.R);
  std::vector<double> x, y;
  const std::size_t half = (rep.ladder.size() + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double F = f(rep.ladder[i]) - fR;
    if (!(F > 0.0) || !std::isfinite(rep.integrals[i]) || !(rep.integrals[i] > 0.0)) continue;
    x.push_back(F);
    y.push_back(rep.integrals[i]);
  }
  return x.size() >= 2 ? fit_loglog(x, y).slope : kNaN;
}

std::string bound_file(Estimate id, bool exponential, double k) {
  std::string s = std::string("bound_") + to_string(id);
  if (exponential) s += "_k" + fmt_short(k);
  return s + ".csv";
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& c, const fs::path& out) {
  RunResult res;
  Bundle bundle(out);
  bundle.json("config.json", c.to_json());

  const auto ladder = log_ladder(c.ladder.r_min, c.ladder.R, c.ladder.rungs);
  const ExponentConfig exps = make_exponents(c.p, c.alpha, c.domain.dim(), c.theta, c.eps, c.delta, c.nu_margin);

  bool need_cone = false, need_density = false, need_capacity = false;
  for (Estimate e : c.estimates) {
    const auto& info = estimate_info(e);
    need_cone = need_cone || info.needs_cone;
    need_density = need_density || info.lambda == LambdaSource::Density;
    need_capacity = need_capacity || info.lambda == LambdaSource::Capacity;
  }

  std::optional<Profile> lam, lam_density, lam_capacity, q, D;
  std::optional<DiamProfile> diams;
  std::optional<ConeConditionResult> cone;
  nlohmann::json summary = {{"name", c.name}, {"schema_version", c.schema_version}};
  nlohmann::json capacity_log = nlohmann::json::object();

  stage(res, "geometry", true, [&] {
    nlohmann::json shells = nlohmann::json::array();
    for (double r : ladder) {
      const Shell s = make_shell(c.domain, r / c.theta, r * c.theta);
      shells.push_back({{"r", r}, {"r1", s.r1}, {"r2", s.r2}, {"empty", s.empty}});
    }
    bundle.json("geometry.json", {{"domain", c.domain.to_json()}, {"ladder", ladder}, {"shells", shells},
                                  {"nu", num(exps.nu)}});
  });

  stage(res, "spectral", true, [&] {
    LambdaProfileOptions o;
    o.h_ang = c.resolution.h_ang;
    auto lp = lambda_profile(c.domain, c.p, c.theta, ladder, o);
    lam = lp.profile;
    bundle.json("eigen_log.json", lp.log);
  });

  stage(res, "cone_condition", need_cone, [&] {
    ConeConditionOptions o;
    o.local.nodes_per_radius = c.resolution.cone_nodes;
    cone = cone_condition(c.domain, c.theta, c.p, ladder, o);
    capacity_log["cone_condition"] = cone->to_json();
    if (!cone->failure.empty()) throw ConvergenceError(cone->failure, kNaN, 0);
  });

  stage(res, "capacity_lambda", need_capacity, [&] {
    lam_capacity = capacity_lambda_profile(c.domain, exps, ladder, {c.resolution.capacity_nodes, {}});
  });

  stage(res, "density_lambda", need_density, [&] {
    DensityLambdaOptions o;
    o.shell.nodes_per_radius = c.resolution.capacity_nodes;
    o.mu.local.nodes_per_radius = c.resolution.mu_nodes;
    lam_density = density_lambda_profile(c.domain, exps, ladder, o);
  });

  stage(res, "capacity_laws", c.law_checks > 0, [&] {
    const auto inst = random_law_instances(c.law_checks, c.seed, c.domain.dim());
    const auto rep = check_capacity_laws(inst);
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& ch : rep.checks)
      checks.push_back({{"law", ch.law}, {"passed", ch.passed}, {"lhs", ch.lhs}, {"rhs", ch.rhs},
                        {"tolerance", ch.tolerance}, {"detail", ch.detail}});
    capacity_log["laws"] = {{"seed", c.seed}, {"count", c.law_checks}, {"all_passed", rep.all_passed()},
                            {"checks", checks}};
    summary["capacity_laws"] = rep.all_passed() ? "passed" : "failed";
    if (!rep.all_passed()) throw Error("capacity law violated: " + rep.first_failure()->detail);
  });

  stage(res, "profiles", true, [&] {
    DiamProfileOptions dopt;
    diams = diam_profile(c.domain, exps, ladder, dopt);
    QProfileOptions qopt;
    qopt.method = c.q_method;
    qopt.norm.nodes_per_radius = c.resolution.norm_nodes;
    q = q_profile(c.domain, c.coefficient, exps, *diams, qopt);
    D = d_profile(*diams);
    capacity_log["diam_eps"] = diams->to_json();
  });

  // profiles.csv and statistics, whatever subset exists
  {
    std::vector<const Profile*> cols;
    nlohmann::json stats = nlohmann::json::object();
    if (lam) {
      cols.push_back(&*lam);
      stats["Lambda"] = profile_stats(*lam, c.p);
    }
    if (diams) {
      cols.push_back(&diams->diam);
      stats["diam_eps"] = profile_stats(diams->diam, 0.0);
    }
    if (q) {
      cols.push_back(&*q);
      stats["q"] = profile_stats(*q, 0.0);
    }
    if (D) {
      cols.push_back(&*D);
      stats["D"] = profile_stats(*D, 0.0);
    }
    if (lam_capacity) {
      cols.push_back(&*lam_capacity);
      stats["Lambda_capacity"] = profile_stats(*lam_capacity, c.p);
    }
    if (lam_density) {
      cols.push_back(&*lam_density);
      stats["Lambda_density"] = profile_stats(*lam_density, c.p);
    }
    if (!cols.empty()) {
      auto os = bundle.open("profiles.csv");
      write_profiles_csv(os, cols);
    }
    summary["profiles"] = stats;
    if (cone)
      summary["cone_condition"] = {{"positive", cone->positive}, {"liminf_estimate", cone->liminf_estimate},
                                   {"threshold", cone->threshold}};
    bundle.json("capacity_log.json", capacity_log);
  }

  // catalog
  std::optional<CatalogEntry> cat;
  if (c.catalog) {
    const ExampleParams xp = example_params(c);
    cat = f_catalog(*c.catalog, xp);
    const auto th = literature_threshold(*c.catalog, xp);
    summary["catalog"] = {{"example", to_string(*c.catalog)},
                          {"guaranteed", cat->guaranteed},
                          {"branch", cat->branch},
                          {"threshold",
                           {{"literature", th.literature}, {"here", th.here}, {"gap", th.gap},
                            {"improvement", th.improvement}}}};
  }

  struct Item {
    Estimate id;
    double k;
    EstimateReport report;
  };
  std::vector<Item> items;
  nlohmann::json est_summary = nlohmann::json::array();
  stage(res, "estimates", !c.estimates.empty(), [&] {
    EstimateInputs in;
    in.p = c.p;
    in.alpha = c.alpha;
    in.R = c.ladder.R;
    in.lambda_spectral = lam ? &*lam : nullptr;
    in.lambda_density = lam_density ? &*lam_density : nullptr;
    in.lambda_capacity = lam_capacity ? &*lam_capacity : nullptr;
    in.q = q ? &*q : nullptr;
    in.D = D ? &*D : nullptr;
    if (cone && cone->failure.empty()) in.cone_positive = cone->positive;
    std::string failures;
    nlohmann::json reports = nlohmann::json::array();
    for (Estimate id : c.estimates) {
      const bool expo = estimate_info(id).exponential;
      const std::vector<double> ks = expo ? c.k_grid : std::vector<double>{c.k_grid.front()};
      for (double k : ks) {
        try {
          auto rep = bound_curve(id, in, 1.0, 1.0, k);
          reports.push_back(rep.to_json());
          items.push_back({id, k, rep});
          auto os = bundle.open(bound_file(id, expo, k));
          write_bound_csv(os, rep, nullptr);
        } catch (const Error& e) {
          nlohmann::json entry = {{"id", to_string(id)}, {"error", e.what()}};
          if (expo) entry["k"] = k;
          est_summary.push_back(entry);
          failures += std::string(failures.empty() ? "" : "; ") + to_string(id) + ": " + e.what();
        }
      }
    }
    bundle.json("estimates.json", reports);
    if (!failures.empty()) throw Error(failures);
  });

  std::optional<DecayMeasurement> meas;
  double M_R = kNaN;
  stage(res, "pde", c.pde.has_value(), [&] {
    ProblemInstance inst;
    inst.domain = make_domain(c.domain.kind(), c.domain.params(), c.ladder.R, c.domain.dim());
    inst.p = c.p;
    inst.alpha = c.alpha;
    inst.b = c.coefficient;
    inst.boundary = c.pde->boundary;
    inst.forcing = c.pde->forcing;
    SolveOptions so;
    so.cells_per_radius = c.pde->cells_per_radius;
    const SolutionField field = solve(inst, so);
    meas = measure_M(field, inst.domain, ladder);
    M_R = outer_max(boundary_function(inst), inst.domain, c.ladder.R);
    {
      auto os = bundle.open("measurement.csv");
      write_measurement_csv(os, *meas);
    }
    if (c.pde->dump_solution) {
      auto os = bundle.open("solution.csv");
      write_solution_csv(os, field);
    }
    nlohmann::json sol = field.to_json();
    summary["pde"] = {{"solution", sol}, {"M_R", M_R}, {"measurement", meas->to_json()}};
    if (c.coefficient.kind() == CoefficientKind::Zero && c.pde->forcing == 0.0)
      summary["pde"]["max_principle"] =
          field.max_value() <= M_R * (1.0 + 1e-9) && field.min_unknown_value() >= -1e-12;
  });

  std::vector<std::optional<BoundVerdict>> verdicts(items.size());
  stage(res, "verify", meas.has_value() && !items.empty(), [&] {
    for (std::size_t i = 0; i < items.size(); ++i) {
      EstimateReport rep = items[i].report;
      rep.M_R = M_R;
      verdicts[i] = verify_bound(*meas, rep);
      auto os = bundle.open(bound_file(items[i].id, estimate_info(items[i].id).exponential, items[i].k));
      write_bound_csv(os, verdicts[i]->calibrated, &meas->M);
    }
  });

  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    nlohmann::json e = {{"id", to_string(it.id)},
                        {"regime", "ok"},
                        {"divergence", it.report.divergence.to_json()},
                        {"refused", it.report.refused}};
    if (estimate_info(it.id).exponential) e["k"] = it.k;
    if (it.report.refused) e["reason"] = it.report.reason;
    if (cat && cat->guaranteed) {
      const double s = catalog_slope(it.report, cat->f);
      e["catalog_slope"] = num(s);
      e["catalog_match"] = std::isfinite(s) && std::abs(s - 1.0) <= 0.1;
    }
    if (verdicts[i]) e["dominance"] = verdicts[i]->to_json();
    else e["dominance"] = meas ? "not evaluated" : "no pde stage";
    est_summary.push_back(e);
  }
  std::stable_sort(est_summary.begin(), est_summary.end(), [](const auto& a, const auto& b) {
    return a.at("id").template get<std::string>() < b.at("id").template get<std::string>();
  });
  summary["estimates"] = est_summary;

  nlohmann::json stages = nlohmann::json::array();
  nlohmann::json missing = nlohmann::json::array();
  for (const auto& s : res.stages) {
    nlohmann::json j = {{"name", s.name}, {"status", s.status}};
    if (!s.error.empty()) j["error"] = s.error;
    stages.push_back(j);
    if (s.status == "failed") missing.push_back(s.name);
  }
  summary["stages"] = stages;
  res.summary = summary;
  bundle.json("summary.json", summary);

  {
    auto os = bundle.open("summary.txt");
    char line[512];
    os << "experiment " << c.name << '\n';
    for (const auto& s : res.stages)
      os << "  stage " << s.name << ": " << s.status << (s.error.empty() ? "" : " (" + s.error + ")") << '\n';
    if (cat) os << "catalog: " << cat->branch << '\n';
    std::snprintf(line, sizeof line, "%-30s %-6s %-14s %-12s %-10s %-10s %-12s\n", "estimate", "k", "divergence",
                  "tail", "slope", "catalog", "dominance");
    os << line;
    for (const auto& e : est_summary) {
      const std::string id = e.at("id").get<std::string>();
      if (e.contains("error")) {
        os << id << ": error: " << e.at("error").get<std::string>() << '\n';
        continue;
      }
      const std::string k = e.contains("k") ? fmt_short(e.at("k").get<double>()) : "-";
      const auto& dv = e.at("divergence");
      std::string catalog = "-";
      if (e.contains("catalog_slope") && !e.at("catalog_slope").is_null())
        catalog = fmt_short(e.at("catalog_slope").get<double>());
      std::string dom = "-";
      if (e.at("dominance").is_object()) dom = e.at("dominance").at("status").get<std::string>();
      else if (e.at("refused").get<bool>()) dom = "refused";
      std::snprintf(line, sizeof line, "%-30s %-6s %-14s %-12s %-10.4f %-10s %-12s\n", id.c_str(), k.c_str(),
                    dv.at("verdict").get<std::string>().c_str(), dv.at("tail_kind").get<std::string>().c_str(),
                    dv.at("tail_exponent").get<double>(), catalog.c_str(), dom.c_str());
      os << line;
    }
  }

  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : bundle.files()) files.push_back(f);
  files.push_back("manifest.json");
  bundle.json("manifest.json", {{"name", c.name},
                                {"schema_version", c.schema_version},
                                {"seed", c.seed},
                                {"stages", stages},
                                {"missing_stages", missing},
                                {"files", files}});
  return res;
}

// ---------------------------------------------------------------- compare

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot read " + path.string());
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) t.header = cells;
    else t.rows.push_back(cells);
    first = false;
  }
  return t;
}

double cell_value(const std::string& s) {
  if (s.empty()) return kNaN;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    return kNaN;
  }
}

// column name -> values, missing flags honoured
std::vector<std::pair<std::string, std::vector<double>>> columns_of(const Table& t, const std::string& prefix,
                                                                    std::vector<double>& ladder) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  ladder.clear();
  for (const auto& row : t.rows) ladder.push_back(cell_value(row.at(0)));
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    const std::string& h = t.header[c];
    if (h.size() > 8 && h.compare(h.size() - 8, 8, "_missing") == 0) continue;
    if (h == "missing") continue;
    std::size_t miss_col = 0;
    for (std::size_t m = 1; m < t.header.size(); ++m)
      if (t.header[m] == h + "_missing" || (h == "M" && t.header[m] == "missing")) miss_col = m;
    std::vector<double> v;
    for (const auto& row : t.rows) {
      double x = c < row.size() ? cell_value(row[c]) : kNaN;
      if (miss_col && miss_col < row.size() && row[miss_col] == "1") x = kNaN;
      v.push_back(x);
    }
    out.emplace_back(prefix + h, v);
  }
  return out;
}

}  // namespace

CompareResult compare_bundles(const fs::path& a, const fs::path& b) {
  if (!fs::exists(a / "manifest.json") || !fs::exists(b / "manifest.json"))
    throw PreconditionError("both arguments must be bundle directories with a manifest");
  std::set<std::string> names;
  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string n = entry.path().filename().string();
    if (n.size() > 4 && n.compare(n.size() - 4, 4, ".csv") == 0 && n != "solution.csv" && fs::exists(b / n))
      names.insert(n);
  }
  if (names.empty()) throw PreconditionError("the bundles share no tables");
  CompareResult res;
  bool have_ladder = false;
  for (const auto& n : names) {
    std::vector<double> la, lb;
    const std::string prefix = n == "profiles.csv" ? "" : n.substr(0, n.size() - 4) + ":";
    const auto ca = columns_of(read_csv(a / n), prefix, la);
    const auto cb = columns_of(read_csv(b / n), prefix, lb);
    if (!same_ladder(la, lb)) throw PreconditionError("ladder mismatch in " + n);
    if (!have_ladder) {
      res.ladder = la;
      have_ladder = true;
    } else if (!same_ladder(res.ladder, la)) {
      throw PreconditionError("ladder mismatch in " + n);
    }
    for (const auto& [name, va] : ca)
      for (const auto& [nb, vb] : cb) {
        if (nb != name) continue;
        std::vector<double> r(va.size(), kNaN);
        for (std::size_t i = 0; i < va.size(); ++i)
          if (std::isfinite(va[i]) && std::isfinite(vb[i]) && va[i] != 0.0) r[i] = vb[i] / va[i];
          else if (va[i] == 0.0 && vb[i] == 0.0) r[i] = 1.0;
        res.columns.push_back(name);
        res.ratios.push_back(r);
      }
  }
  std::ostringstream os;
  os << "r";
  for (const auto& c : res.columns) os << ',' << c;
  os << '\n';
  for (std::size_t i = 0; i < res.ladder.size(); ++i) {
    os << fmt(res.ladder[i]);
    for (const auto& r : res.ratios) os << ',' << (std::isfinite(r[i]) ? fmt(r[i]) : "nan");
    os << '\n';
  }
  res.table = os.str();
  return res;
}

}  // namespace wk
