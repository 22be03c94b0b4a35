#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace wk {

// Points always carry three coordinates; two-dimensional code leaves the
// last one at zero.
using Point = std::array<double, 3>;
using Indicator = std::function<bool(const Point&)>;

double norm(const Point& x, int dim);
double distance(const Point& a, const Point& b, int dim);

// (n-1)-dimensional volume of the unit sphere in R^n.
double unit_sphere_measure(int dim);

enum class DomainKind { ConeComplement, PowerCusp, Sector, Annulus, CustomOracle };

const char* to_string(DomainKind kind);
DomainKind domain_kind_from_string(const std::string& name);

// Open set Omega near the origin, described by an exact indicator.
//
//   ConeComplement(k1):  |x'| > k1 x_n            (exterior of a closed cone)
//   PowerCusp(k1, s):    |x_n| < k1 |x'|^s, s > 1  (two-sided horn)
//   Sector(angle):       polar angle of (x_1, x_2) in (0, angle)
//   Annulus:             R^n without the origin
//
// R is the outer radius of the region of interest. Values are immutable.
class DomainSpec {
 public:
  DomainKind kind() const { return kind_; }
  double R() const { return R_; }
  int dim() const { return dim_; }
  const std::map<std::string, double>& params() const { return params_; }
  double param(const std::string& name) const;
  const std::string& label() const { return label_; }

  bool contains(const Point& x) const;

  nlohmann::json to_json() const;

 private:
  friend DomainSpec make_domain(DomainKind, const std::map<std::string, double>&, double, int);
  friend DomainSpec make_custom_domain(Indicator, double, int, std::string);

  DomainKind kind_ = DomainKind::Annulus;
  double R_ = 1.0;
  int dim_ = 2;
  std::map<std::string, double> params_;
  Indicator custom_;
  std::string label_;
  // cached parameters for the hot path
  double k1_ = 0.0, s_ = 0.0, angle_ = 0.0;
};

// Validates parameters and the standing assumption that S_r meets Omega
// for every sampled r in (0, R). Throws PreconditionError.
DomainSpec make_domain(DomainKind kind, const std::map<std::string, double>& params, double R,
                       int dim);
DomainSpec make_custom_domain(Indicator contains, double R, int dim, std::string label = "custom");
DomainSpec domain_from_json(const nlohmann::json& doc);

// Samples S_r for a point of Omega; false if none was found.
bool sphere_meets_domain(const DomainSpec& domain, double r);

// Omega_{r1,r2} = B_{r1,r2} ∩ Omega.
struct Shell {
  double r1 = 0.0;
  double r2 = 0.0;
  bool empty = false;

  bool contains(const DomainSpec& domain, const Point& x) const;
};

Shell make_shell(const DomainSpec& domain, double r1, double r2);

// Uniform Cartesian lattice. Node i has coordinates origin + index * h.
// Every node carries exactly one inside/outside flag.
class Grid {
 public:
  Grid() = default;
  Grid(int dim, const Point& origin, double h, const std::array<int, 3>& count);

  int dim() const { return dim_; }
  double h() const { return h_; }
  const Point& origin() const { return origin_; }
  const std::array<int, 3>& count() const { return count_; }
  std::size_t size() const { return size_; }
  std::size_t stride(int axis) const { return stride_[axis]; }

  Point node(std::size_t index) const;
  std::array<int, 3> coords(std::size_t index) const;
  std::size_t index(const std::array<int, 3>& c) const;

  // Nearest node to x, or size() when x is outside the box.
  std::size_t nearest(const Point& x) const;

  std::vector<std::uint8_t>& inside() { return inside_; }
  const std::vector<std::uint8_t>& inside() const { return inside_; }
  std::size_t inside_count() const;
  bool empty() const { return inside_count() == 0; }

  void classify(const Indicator& indicator);

 private:
  int dim_ = 2;
  Point origin_{0.0, 0.0, 0.0};
  double h_ = 1.0;
  std::array<int, 3> count_{1, 1, 1};
  std::array<std::size_t, 3> stride_{1, 1, 1};
  std::size_t size_ = 1;
  std::vector<std::uint8_t> inside_;
};

// Lattice aligned with the origin (nodes at integer multiples of h) covering
// B_{r2}, nodes classified against Omega_{r1,r2}. An empty shell produces an
// all-outside grid rather than an error.
Grid shell_mesh(const DomainSpec& domain, double r1, double r2, double h);

// Lattice with spacing h aligned on `center`, covering the cube of half
// width `half_width` around it.
Grid centered_grid(int dim, const Point& center, double half_width, double h);

// Discretization of S_r: an arc (n = 2) or a latitude-longitude sphere with
// pole nodes (n = 3). Simplices carry the P1 gradient of each vertex basis
// function so that |grad psi| is evaluated with the induced metric.
struct SphereMesh {
  struct Simplex {
    std::array<int, 3> vertex{-1, -1, -1};  // -1: homogeneous Dirichlet point
    int vertex_count = 0;
    double measure = 0.0;                   // length or area, including weight
    std::array<Point, 3> gradient{};        // gradient of each vertex basis function
  };

  int dim = 2;
  double radius = 1.0;
  double h_ang = 0.0;
  std::vector<Point> nodes;
  std::vector<double> weights;              // lumped mass (dS_r) per node
  std::vector<std::uint8_t> inside;         // node lies in E = S_r ∩ Omega
  std::vector<std::uint8_t> boundary;       // outside node adjacent to E
  std::vector<Simplex> simplices;
  double section_length = 0.0;              // n = 2: measure of E from cut edges

  std::size_t inside_count() const;
  std::size_t boundary_count() const;
  // Quadrature of 1 over the whole sphere.
  double full_measure() const;
  // Quadrature of 1 over E.
  double section_measure() const;
};

// Throws PreconditionError when no node of the mesh lies in Omega.
SphereMesh sphere_section_mesh(const DomainSpec& domain, double r, double h_ang);

// A set described by its indicator together with a deterministic list of
// member sample points. Used where the definitions take sup/inf over points
// of a continuum.
struct Region {
  int dim = 2;
  Indicator contains;
  std::vector<Point> samples;
  double spacing = 0.0;      // resolution of the sampling
  double extent = 0.0;       // upper bound on the diameter
  bool known_empty = false;

  static Region empty(int dim);
  static Region from_grid(const Grid& grid, Indicator exact = {});
};

struct ShellSampling {
  int radial = 9;
  int min_members = 24;
  int max_level = 10;
};

// Polar (n = 2) or latitude-longitude (n = 3) sampling of Omega_{r1,r2},
// refined in angle until at least min_members points land in Omega.
Region shell_region(const DomainSpec& domain, double r1, double r2, const ShellSampling& opts = {});

}  // namespace wk
