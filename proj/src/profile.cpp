#include "wk/profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "wk/error.hpp"
#include "wk/fit.hpp"

namespace wk {

std::vector<double> log_ladder(double r_min, double R, int rungs) {
  if (!(r_min > 0.0) || !(R > r_min)) throw PreconditionError("ladder requires 0 < r_min < R");
  if (rungs < 1) throw PreconditionError("ladder needs at least one rung");
  std::vector<double> out(rungs);
  for (int k = 0; k < rungs; ++k) out[k] = r_min * std::pow(R / r_min, static_cast<double>(k) / rungs);
  return out;
}

Profile::Profile(std::vector<double> ladder, std::string name)
    : name_(std::move(name)), ladder_(std::move(ladder)) {
  for (std::size_t i = 1; i < ladder_.size(); ++i)
    if (!(ladder_[i] > ladder_[i - 1])) throw PreconditionError("profile ladder must increase");
  if (!ladder_.empty() && !(ladder_.front() > 0.0))
    throw PreconditionError("profile ladder must be positive");
  values_.assign(ladder_.size(), 0.0);
  missing_.assign(ladder_.size(), 1);
}

std::size_t Profile::available() const {
  return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), 0));
}

void Profile::set(std::size_t i, double v) {
  if (!(v >= 0.0) || std::isnan(v))
    throw PreconditionError("profile '" + name_ + "' value must be non-negative");
  values_[i] = v;
  missing_[i] = 0;
}

void Profile::mark_missing(std::size_t i) {
  values_[i] = 0.0;
  missing_[i] = 1;
}

double Profile::at(double r) const {
  std::size_t lo = ladder_.size(), hi = ladder_.size();
  for (std::size_t i = 0; i < ladder_.size(); ++i) {
    if (missing_[i]) continue;
    if (ladder_[i] <= r) lo = i;
    if (ladder_[i] >= r && hi == ladder_.size()) hi = i;
  }
  if (lo == ladder_.size() && hi == ladder_.size())
    throw PreconditionError("profile '" + name_ + "' has no samples");
  if (lo == ladder_.size()) return values_[hi];
  if (hi == ladder_.size() || hi == lo) return values_[lo];
  const double x = std::log(r / ladder_[lo]) / std::log(ladder_[hi] / ladder_[lo]);
  const double a = values_[lo], b = values_[hi];
  if (a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b))
    return std::exp((1.0 - x) * std::log(a) + x * std::log(b));
  return (1.0 - x) * a + x * b;
}

nlohmann::json Profile::to_json() const {
  nlohmann::json values = nlohmann::json::array();
  for (std::size_t i = 0; i < size(); ++i) {
    if (missing_[i] || !std::isfinite(values_[i])) values.push_back(nullptr);
    else values.push_back(values_[i]);
  }
  return {{"name", name_}, {"r", ladder_}, {"values", values}};
}

void write_profiles_csv(std::ostream& os, std::span<const Profile* const> profiles) {
  if (profiles.empty()) return;
  const auto ladder = profiles.front()->ladder();
  for (const Profile* p : profiles)
    if (!same_ladder(ladder, p->ladder())) throw PreconditionError("profiles use different ladders");
  os << "r";
  for (const Profile* p : profiles) os << ',' << p->name() << ',' << p->name() << "_missing";
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12e", ladder[i]);
    os << buf;
    for (const Profile* p : profiles) {
      std::snprintf(buf, sizeof buf, "%.12e", p->missing(i) ? 0.0 : p->value(i));
      os << ',' << buf << ',' << (p->missing(i) ? 1 : 0);
    }
    os << '\n';
  }
}

bool same_ladder(std::span<const double> a, std::span<const double> b, double rel_tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > rel_tol * std::max(std::abs(a[i]), std::abs(b[i]))) return false;
  return true;
}

// ---------------------------------------------------------------- fits

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  LineFit f;
  const std::size_t n = std::min(x.size(), y.size());
  f.count = n;
  if (n < 2) return f;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

LineFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  return fit_line(lx, ly);
}

}  // namespace wk
