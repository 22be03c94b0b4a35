#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace wk {

// Log-spaced radii r_k = r_min (R / r_min)^{k / rungs}, k = 0 .. rungs-1.
// Strictly increasing and strictly below R.
std::vector<double> log_ladder(double r_min, double R, int rungs);

// A non-negative function of r sampled on a ladder. Interpolation is
// piecewise linear in (log r, log value); samples marked missing are
// skipped. Outside the ladder the nearest available value is used.
class Profile {
 public:
  Profile() = default;
  explicit Profile(std::vector<double> ladder, std::string name = {});

  const std::string& name() const { return name_; }
  std::size_t size() const { return ladder_.size(); }
  std::span<const double> ladder() const { return ladder_; }
  std::span<const double> values() const { return values_; }

  double value(std::size_t i) const { return values_[i]; }
  bool missing(std::size_t i) const { return missing_[i] != 0; }
  std::size_t available() const;

  void set(std::size_t i, double v);
  void mark_missing(std::size_t i);

  double at(double r) const;

  nlohmann::json to_json() const;

 private:
  std::string name_;
  std::vector<double> ladder_;
  std::vector<double> values_;
  std::vector<unsigned char> missing_;
};

// Writes r followed by (value, missing) columns for each profile; all
// profiles must share the ladder.
void write_profiles_csv(std::ostream& os, std::span<const Profile* const> profiles);

bool same_ladder(std::span<const double> a, std::span<const double> b, double rel_tol = 1e-12);

}  // namespace wk
