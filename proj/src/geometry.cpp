#include "wk/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wk/error.hpp"

namespace wk {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Point sub(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Point cross(const Point& a, const Point& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Point scale(const Point& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

double require_param(const std::map<std::string, double>& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw PreconditionError("domain parameter '" + name + "' is missing");
  if (!std::isfinite(it->second))
    throw PreconditionError("domain parameter '" + name + "' is not finite");
  return it->second;
}

Point on_circle(double r, double angle) { return {r * std::cos(angle), r * std::sin(angle), 0.0}; }

Point on_sphere(double r, double polar, double azimuth) {
  const double s = std::sin(polar);
  return {r * s * std::cos(azimuth), r * s * std::sin(azimuth), r * std::cos(polar)};
}

}  // namespace

double norm(const Point& x, int dim) {
  double s = x[0] * x[0] + x[1] * x[1];
  if (dim > 2) s += x[2] * x[2];
  return std::sqrt(s);
}

double distance(const Point& a, const Point& b, int dim) { return norm(sub(a, b), dim); }

double unit_sphere_measure(int dim) {
  const double half = 0.5 * dim;
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

const char* to_string(DomainKind kind) {
  switch (kind) {
    case DomainKind::ConeComplement: return "ConeComplement";
    case DomainKind::PowerCusp: return "PowerCusp";
    case DomainKind::Sector: return "Sector";
    case DomainKind::Annulus: return "Annulus";
    case DomainKind::CustomOracle: return "CustomOracle";
  }
  return "?";
}

DomainKind domain_kind_from_string(const std::string& name) {
  for (auto kind : {DomainKind::ConeComplement, DomainKind::PowerCusp, DomainKind::Sector,
                    DomainKind::Annulus, DomainKind::CustomOracle}) {
    if (name == to_string(kind)) return kind;
  }
  throw PreconditionError("unknown domain kind '" + name + "'");
}

double DomainSpec::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw PreconditionError("domain has no parameter '" + name + "'");
  return it->second;
}

bool DomainSpec::contains(const Point& x) const {
  switch (kind_) {
    case DomainKind::ConeComplement: {
      // axis along the last coordinate
      const double axial = dim_ == 2 ? x[1] : x[2];
      const double radial = dim_ == 2 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
      return radial > k1_ * axial;
    }
    case DomainKind::PowerCusp: {
      const double axial = dim_ == 2 ? x[1] : x[2];
      const double radial = dim_ == 2 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
      return std::abs(axial) < k1_ * std::pow(radial, s_);
    }
    case DomainKind::Sector: {
      if (x[0] == 0.0 && x[1] == 0.0) return false;
      double a = std::atan2(x[1], x[0]);
      if (a < 0.0) a += kTwoPi;
      return a > 0.0 && a < angle_;
    }
    case DomainKind::Annulus:
      return norm(x, dim_) > 0.0;
    case DomainKind::CustomOracle:
      return custom_(x);
  }
  return false;
}

nlohmann::json DomainSpec::to_json() const {
  if (kind_ == DomainKind::CustomOracle)
    throw PreconditionError("custom oracle domains cannot be serialized");
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : params_) params[k] = v;
  return {{"kind", to_string(kind_)}, {"params", params}, {"R", R_}, {"n", dim_}};
}

bool sphere_meets_domain(const DomainSpec& domain, double r) {
  if (domain.dim() == 2) {
    for (int n = 64; n <= (1 << 18); n *= 2) {
      const double step = kTwoPi / n;
      // odd refinements only visit new angles
      for (int j = (n == 64 ? 0 : 1); j < n; j += (n == 64 ? 1 : 2))
        if (domain.contains(on_circle(r, j * step))) return true;
    }
    return false;
  }
  for (int rows = 16; rows <= 2048; rows *= 2) {
    const int cols = std::min(2 * rows, 1024);
    const double dt = std::numbers::pi / rows;
    const double dp = kTwoPi / cols;
    for (int i = 0; i <= rows; ++i)
      for (int j = 0; j < cols; ++j)
        if (domain.contains(on_sphere(r, i * dt, j * dp))) return true;
  }
  return false;
}

namespace {

void check_standing_assumption(const DomainSpec& domain) {
  // log-spaced radii down to R / 100
  constexpr int kRadii = 16;
  for (int k = 0; k < kRadii; ++k) {
    const double r = domain.R() * std::pow(10.0, -2.0 * (k + 0.5) / kRadii);
    if (!sphere_meets_domain(domain, r))
      throw PreconditionError("S_r does not meet the domain at r = " + std::to_string(r));
  }
}

}  // namespace

DomainSpec make_domain(DomainKind kind, const std::map<std::string, double>& params, double R,
                       int dim) {
  if (!(R > 0.0) || !std::isfinite(R)) throw PreconditionError("outer radius R must be positive");
  if (dim < 2 || dim > 3) throw PreconditionError("only n = 2 and n = 3 are supported");
  DomainSpec d;
  d.kind_ = kind;
  d.R_ = R;
  d.dim_ = dim;
  switch (kind) {
    case DomainKind::ConeComplement:
      d.k1_ = require_param(params, "k1");
      if (!(d.k1_ > 0.0)) throw PreconditionError("ConeComplement requires k1 > 0");
      d.params_ = {{"k1", d.k1_}};
      break;
    case DomainKind::PowerCusp:
      d.k1_ = require_param(params, "k1");
      d.s_ = require_param(params, "s");
      if (!(d.k1_ > 0.0)) throw PreconditionError("PowerCusp requires k1 > 0");
      if (!(d.s_ > 1.0)) throw PreconditionError("PowerCusp requires s > 1");
      d.params_ = {{"k1", d.k1_}, {"s", d.s_}};
      break;
    case DomainKind::Sector:
      d.angle_ = require_param(params, "angle");
      if (!(d.angle_ > 0.0 && d.angle_ < kTwoPi))
        throw PreconditionError("Sector requires 0 < angle < 2 pi");
      d.params_ = {{"angle", d.angle_}};
      break;
    case DomainKind::Annulus:
      break;
    case DomainKind::CustomOracle:
      throw PreconditionError("use make_custom_domain for oracle domains");
  }
  d.label_ = to_string(kind);
  check_standing_assumption(d);
  return d;
}

DomainSpec make_custom_domain(Indicator contains, double R, int dim, std::string label) {
  if (!contains) throw PreconditionError("custom domain needs an indicator");
  if (!(R > 0.0) || !std::isfinite(R)) throw PreconditionError("outer radius R must be positive");
  if (dim < 2 || dim > 3) throw PreconditionError("only n = 2 and n = 3 are supported");
  DomainSpec d;
  d.kind_ = DomainKind::CustomOracle;
  d.R_ = R;
  d.dim_ = dim;
  d.custom_ = std::move(contains);
  d.label_ = std::move(label);
  check_standing_assumption(d);
  return d;
}

DomainSpec domain_from_json(const nlohmann::json& doc) {
  try {
    const auto kind = domain_kind_from_string(doc.at("kind").get<std::string>());
    std::map<std::string, double> params;
    if (doc.contains("params"))
      for (const auto& [k, v] : doc.at("params").items()) params[k] = v.get<double>();
    return make_domain(kind, params, doc.at("R").get<double>(), doc.at("n").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("malformed domain document: ") + e.what());
  }
}

bool Shell::contains(const DomainSpec& domain, const Point& x) const {
  if (empty) return false;
  const double r = norm(x, domain.dim());
  return r > r1 && r < r2 && domain.contains(x);
}

Shell make_shell(const DomainSpec& domain, double r1, double r2) {
  if (!(r1 > 0.0) || !(r2 > r1)) throw PreconditionError("shell requires 0 < r1 < r2");
  Shell s{r1, r2, false};
  // flagged empty only if no sampled sphere inside meets Omega
  bool hit = false;
  for (int k = 0; k < 5 && !hit; ++k) {
    const double r = r1 * std::pow(r2 / r1, (k + 0.5) / 5.0);
    hit = sphere_meets_domain(domain, r);
  }
  s.empty = !hit;
  return s;
}

// ---------------------------------------------------------------- Grid

Grid::Grid(int dim, const Point& origin, double h, const std::array<int, 3>& count)
    : dim_(dim), origin_(origin), h_(h), count_(count) {
  if (!(h > 0.0)) throw PreconditionError("grid spacing must be positive");
  if (dim < 2 || dim > 3) throw PreconditionError("grids exist for n = 2 and n = 3 only");
  if (dim == 2) count_[2] = 1;
  stride_ = {1, static_cast<std::size_t>(count_[0]),
             static_cast<std::size_t>(count_[0]) * static_cast<std::size_t>(count_[1])};
  size_ = stride_[2] * static_cast<std::size_t>(count_[2]);
  inside_.assign(size_, 0);
}

Point Grid::node(std::size_t index) const {
  const auto c = coords(index);
  return {origin_[0] + c[0] * h_, origin_[1] + c[1] * h_, dim_ == 3 ? origin_[2] + c[2] * h_ : 0.0};
}

std::array<int, 3> Grid::coords(std::size_t index) const {
  const int k = static_cast<int>(index / stride_[2]);
  const std::size_t rest = index % stride_[2];
  return {static_cast<int>(rest % stride_[1]), static_cast<int>(rest / stride_[1]), k};
}

std::size_t Grid::index(const std::array<int, 3>& c) const {
  return static_cast<std::size_t>(c[0]) + stride_[1] * static_cast<std::size_t>(c[1]) +
         stride_[2] * static_cast<std::size_t>(c[2]);
}

std::size_t Grid::nearest(const Point& x) const {
  std::array<int, 3> c{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    const long v = std::lround((x[a] - origin_[a]) / h_);
    if (v < 0 || v >= count_[a]) return size_;
    c[a] = static_cast<int>(v);
  }
  return index(c);
}

std::size_t Grid::inside_count() const {
  return static_cast<std::size_t>(std::count(inside_.begin(), inside_.end(), std::uint8_t{1}));
}

void Grid::classify(const Indicator& indicator) {
  for (std::size_t i = 0; i < size_; ++i) inside_[i] = indicator(node(i)) ? 1 : 0;
}

Grid shell_mesh(const DomainSpec& domain, double r1, double r2, double h) {
  if (!(r1 > 0.0) || !(r2 > r1)) throw PreconditionError("shell_mesh requires 0 < r1 < r2");
  if (r2 > domain.R() * (1.0 + 1e-12)) throw PreconditionError("shell_mesh requires r2 <= R");
  if (!(h > 0.0)) throw PreconditionError("grid spacing must be positive");
  const int dim = domain.dim();
  const int half = static_cast<int>(std::ceil(r2 / h)) + 1;
  const double o = -half * h;
  Grid g(dim, {o, o, dim == 3 ? o : 0.0}, h, {2 * half + 1, 2 * half + 1, 2 * half + 1});
  // integer lattice coordinates keep the classification identical across refinements
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto c = g.coords(i);
    const Point x{(c[0] - half) * h, (c[1] - half) * h, dim == 3 ? (c[2] - half) * h : 0.0};
    const double r = norm(x, dim);
    g.inside()[i] = (r > r1 && r < r2 && domain.contains(x)) ? 1 : 0;
  }
  return g;
}

Grid centered_grid(int dim, const Point& center, double half_width, double h) {
  const int half = static_cast<int>(std::ceil(half_width / h));
  Point o{center[0] - half * h, center[1] - half * h, dim == 3 ? center[2] - half * h : 0.0};
  return Grid(dim, o, h, {2 * half + 1, 2 * half + 1, 2 * half + 1});
}

// ---------------------------------------------------------------- SphereMesh

std::size_t SphereMesh::inside_count() const {
  return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), std::uint8_t{1}));
}

std::size_t SphereMesh::boundary_count() const {
  return static_cast<std::size_t>(std::count(boundary.begin(), boundary.end(), std::uint8_t{1}));
}

double SphereMesh::full_measure() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

double SphereMesh::section_measure() const {
  if (dim == 2) return section_length;
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (inside[i]) s += weights[i];
  return s;
}

namespace {

SphereMesh arc_mesh(const DomainSpec& domain, double r, double h_ang) {
  SphereMesh m;
  m.dim = 2;
  m.radius = r;
  const int n = std::max(8, static_cast<int>(std::ceil(kTwoPi / h_ang - 1e-9)));
  const double step = kTwoPi / n;
  m.h_ang = step;
  m.nodes.resize(n);
  m.weights.assign(n, r * step);
  m.inside.resize(n);
  m.boundary.assign(n, 0);
  for (int j = 0; j < n; ++j) {
    m.nodes[j] = on_circle(r, j * step);
    m.inside[j] = domain.contains(m.nodes[j]) ? 1 : 0;
  }
  const double full = r * step;
  for (int j = 0; j < n; ++j) {
    const int a = j;
    const int b = (j + 1) % n;
    if (!m.inside[a] && !m.inside[b]) continue;
    const double mid = (j + 0.5) * step;
    const Point tangent{-std::sin(mid), std::cos(mid), 0.0};
    SphereMesh::Simplex s;
    if (m.inside[a] && m.inside[b]) {
      s.vertex = {a, b, -1};
      s.vertex_count = 2;
      s.measure = full;
      s.gradient[0] = scale(tangent, -1.0 / full);
      s.gradient[1] = scale(tangent, 1.0 / full);
    } else {
      // locate the crossing of the indicator along the edge
      const bool forward = m.inside[a];
      const double from = forward ? j * step : (j + 1) * step;
      const double dir = forward ? step : -step;
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 48; ++it) {
        const double mid_t = 0.5 * (lo + hi);
        if (domain.contains(on_circle(r, from + mid_t * dir))) lo = mid_t;
        else hi = mid_t;
      }
      const double frac = std::max(0.5 * (lo + hi), 1e-6);
      const double len = frac * full;
      s.vertex = {forward ? a : b, -1, -1};
      s.vertex_count = 2;
      s.measure = len;
      s.gradient[0] = scale(tangent, (forward ? -1.0 : 1.0) / len);
      s.gradient[1] = scale(tangent, (forward ? 1.0 : -1.0) / len);
      m.boundary[forward ? b : a] = 1;
    }
    m.simplices.push_back(s);
    m.section_length += s.measure;
  }
  return m;
}

SphereMesh latlong_mesh(const DomainSpec& domain, double r, double h_ang) {
  SphereMesh m;
  m.dim = 3;
  m.radius = r;
  const int rows = std::max(4, static_cast<int>(std::ceil(std::numbers::pi / h_ang - 1e-9)));
  const int cols = 2 * rows;
  const double dt = std::numbers::pi / rows;
  const double dp = kTwoPi / cols;
  m.h_ang = dt;
  const int count = 2 + (rows - 1) * cols;
  m.nodes.resize(count);
  m.weights.resize(count);
  auto id = [&](int i, int j) -> int {
    if (i == 0) return 0;
    if (i == rows) return count - 1;
    return 1 + (i - 1) * cols + ((j % cols) + cols) % cols;
  };
  m.nodes[0] = {0.0, 0.0, r};
  m.nodes[count - 1] = {0.0, 0.0, -r};
  const double cap = kTwoPi * r * r * (1.0 - std::cos(0.5 * dt));
  m.weights[0] = cap;
  m.weights[count - 1] = cap;
  for (int i = 1; i < rows; ++i) {
    const double band = r * r * dp * (std::cos((i - 0.5) * dt) - std::cos((i + 0.5) * dt));
    for (int j = 0; j < cols; ++j) {
      m.nodes[id(i, j)] = on_sphere(r, i * dt, j * dp);
      m.weights[id(i, j)] = band;
    }
  }
  m.inside.resize(count);
  m.boundary.assign(count, 0);
  for (int v = 0; v < count; ++v) m.inside[v] = domain.contains(m.nodes[v]) ? 1 : 0;

  auto add_triangle = [&](int a, int b, int c, double weight) {
    if (a == b || b == c || a == c) return;
    if (!m.inside[a] && !m.inside[b] && !m.inside[c]) return;
    const Point& x0 = m.nodes[a];
    const Point& x1 = m.nodes[b];
    const Point& x2 = m.nodes[c];
    const Point nrm = cross(sub(x1, x0), sub(x2, x0));
    const double nn = dot(nrm, nrm);
    if (nn <= 0.0) return;
    SphereMesh::Simplex s;
    s.vertex = {a, b, c};
    s.vertex_count = 3;
    s.measure = weight * 0.5 * std::sqrt(nn);
    s.gradient[0] = scale(cross(nrm, sub(x2, x1)), 1.0 / nn);
    s.gradient[1] = scale(cross(nrm, sub(x0, x2)), 1.0 / nn);
    s.gradient[2] = scale(cross(nrm, sub(x1, x0)), 1.0 / nn);
    m.simplices.push_back(s);
    for (int v : {a, b, c})
      if (!m.inside[v]) m.boundary[v] = 1;
  };
  // both diagonals, half weight each, to avoid a preferred direction
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const int A = id(i, j), B = id(i, j + 1), C = id(i + 1, j + 1), D = id(i + 1, j);
      add_triangle(A, B, C, 0.5);
      add_triangle(A, C, D, 0.5);
      add_triangle(A, B, D, 0.5);
      add_triangle(B, C, D, 0.5);
    }
  }
  return m;
}

}  // namespace

SphereMesh sphere_section_mesh(const DomainSpec& domain, double r, double h_ang) {
  if (!(r > 0.0) || !(r < domain.R() * (1.0 + 1e-12)))
    throw PreconditionError("sphere_section_mesh requires r in (0, R)");
  if (!(h_ang > 0.0) || h_ang > 1.0) throw PreconditionError("h_ang must lie in (0, 1]");
  SphereMesh m = domain.dim() == 2 ? arc_mesh(domain, r, h_ang) : latlong_mesh(domain, r, h_ang);
  if (m.inside_count() == 0)
    throw PreconditionError("S_r ∩ Omega has no mesh node at r = " + std::to_string(r) +
                            " (standing assumption or mesh resolution)");
  return m;
}

// ---------------------------------------------------------------- Region

Region Region::empty(int dim) {
  Region reg;
  reg.dim = dim;
  reg.contains = [](const Point&) { return false; };
  reg.known_empty = true;
  return reg;
}

Region Region::from_grid(const Grid& grid, Indicator exact) {
  Region reg;
  reg.dim = grid.dim();
  reg.spacing = grid.h();
  Point lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!grid.inside()[i]) continue;
    const Point x = grid.node(i);
    reg.samples.push_back(x);
    for (int a = 0; a < reg.dim; ++a) {
      lo[a] = std::min(lo[a], x[a]);
      hi[a] = std::max(hi[a], x[a]);
    }
  }
  reg.known_empty = reg.samples.empty();
  if (!reg.known_empty) reg.extent = distance(lo, hi, reg.dim) + 2.0 * grid.h();
  if (exact) {
    reg.contains = std::move(exact);
  } else {
    reg.contains = [grid](const Point& x) {
      const std::size_t i = grid.nearest(x);
      return i < grid.size() && grid.inside()[i] != 0;
    };
  }
  return reg;
}

Region shell_region(const DomainSpec& domain, double r1, double r2, const ShellSampling& opts) {
  if (!(r1 > 0.0) || !(r2 > r1)) throw PreconditionError("shell_region requires 0 < r1 < r2");
  const int dim = domain.dim();
  Region reg;
  reg.dim = dim;
  reg.extent = 2.0 * r2;
  reg.contains = [domain, r1, r2](const Point& x) {
    const double r = norm(x, domain.dim());
    return r > r1 && r < r2 && domain.contains(x);
  };
  std::vector<double> radii(opts.radial);
  for (int k = 0; k < opts.radial; ++k)
    radii[k] = r1 * std::pow(r2 / r1, (k + 0.5) / opts.radial);

  for (int level = 0; level <= opts.max_level; ++level) {
    reg.samples.clear();
    double dang;
    if (dim == 2) {
      const int n = 64 << level;
      dang = kTwoPi / n;
      for (double t : radii)
        for (int j = 0; j < n; ++j) {
          const Point x = on_circle(t, j * dang);
          if (domain.contains(x)) reg.samples.push_back(x);
        }
    } else {
      const int rows = 16 << std::min(level, 6);
      const int cols = 2 * rows;
      dang = std::numbers::pi / rows;
      for (double t : radii)
        for (int i = 1; i < rows; ++i)
          for (int j = 0; j < cols; ++j) {
            const Point x = on_sphere(t, i * dang, j * (kTwoPi / cols));
            if (domain.contains(x)) reg.samples.push_back(x);
          }
      if (level >= 6) level = opts.max_level;  // finest 3-D level reached
    }
    reg.spacing = std::min(r1 * dang, radii.size() > 1 ? radii[1] - radii[0] : r2 - r1);
    if (static_cast<int>(reg.samples.size()) >= opts.min_members) break;
  }
  return reg;
}

}  // namespace wk
