#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tfim/error.hpp"

namespace tfim {

struct Knot {
  double t;
  double hx;
  double hz;
};

struct Fields {
  double hx;
  double hz;
};

/// Piecewise-linear field protocol (h_x(t), h_z(t)) on [0, t_f]. Times in 1/J,
/// fields in J.
class Schedule {
 public:
  Schedule() = default;

  Schedule(std::vector<Knot> knots, std::string descriptor)
      : knots_(std::move(knots)), descriptor_(std::move(descriptor)) {
    if (knots_.empty()) throw Error(ErrorCategory::schedule, "schedule needs at least one knot");
    if (knots_.front().t != 0.0) throw Error(ErrorCategory::schedule, "first knot must be at t = 0");
    for (std::size_t k = 1; k < knots_.size(); ++k)
      if (!(knots_[k].t > knots_[k - 1].t))
        throw Error(ErrorCategory::schedule, "knot times must be strictly increasing");
    for (const auto& k : knots_)
      if (!std::isfinite(k.t) || !std::isfinite(k.hx) || !std::isfinite(k.hz))
        throw Error(ErrorCategory::schedule, "non-finite knot");
  }

  const std::vector<Knot>& knots() const { return knots_; }
  const std::string& descriptor() const { return descriptor_; }
  double t_final() const { return knots_.back().t; }

  /// True when every knot carries the same fields.
  bool is_constant() const {
    for (const auto& k : knots_)
      if (k.hx != knots_.front().hx || k.hz != knots_.front().hz) return false;
    return true;
  }

  Fields eval(double t) const {
    // A few ulps of slack at the ends so accumulated step times do not trip the guard.
    const double slack = 1e-12 * std::max(1.0, t_final());
    if (!(t >= -slack && t <= t_final() + slack))
      throw Error(ErrorCategory::domain, "schedule evaluated outside [0, t_f]");
    if (t <= knots_.front().t) return {knots_.front().hx, knots_.front().hz};
    if (t >= knots_.back().t) return {knots_.back().hx, knots_.back().hz};
    std::size_t k = 1;
    while (knots_[k].t < t) ++k;
    const Knot& a = knots_[k - 1];
    const Knot& b = knots_[k];
    if (t == b.t) return {b.hx, b.hz};
    const double w = (t - a.t) / (b.t - a.t);
    return {a.hx + w * (b.hx - a.hx), a.hz + w * (b.hz - a.hz)};
  }

 private:
  std::vector<Knot> knots_;
  std::string descriptor_;
};

inline Fields schedule_eval(const Schedule& s, double t) { return s.eval(t); }

enum class AnnealVariant { I, II };

struct AnnealParams {
  double t_rise;
  double t_sweep;
  double t_fall;
  double hx_max;
  double hz0;
  double hzf;
};

/// Defaults for the two reference sweeps. The free duration (t_fall for I,
/// t_sweep for II) is passed by the caller.
inline AnnealParams anneal_defaults(AnnealVariant v, double free_duration) {
  if (v == AnnealVariant::I) return {1.5, 1.5, free_duration, 3.5, -8.0, 0.0};
  return {1.5, free_duration, 1.5, 0.5, -8.0, 0.0};
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Three segments: rise h_x 0 -> hx_max at hz0, sweep h_z hz0 -> hzf at hx_max,
/// fall h_x hx_max -> 0 at hzf.
inline Schedule make_anneal(AnnealVariant variant, double t_rise, double t_sweep, double t_fall, double hx_max,
                            double hz0, double hzf) {
  if (!(t_rise > 0.0) || !(t_sweep > 0.0) || !(t_fall > 0.0))
    throw Error(ErrorCategory::schedule, "anneal durations must be positive");
  const double t1 = t_rise;
  const double t2 = t1 + t_sweep;
  const double t3 = t2 + t_fall;
  std::string name = variant == AnnealVariant::I ? "anneal-I" : "anneal-II";
  name += "(t_rise=" + format_double(t_rise) + ",t_sweep=" + format_double(t_sweep) +
          ",t_fall=" + format_double(t_fall) + ",hx_max=" + format_double(hx_max) + ",hz0=" + format_double(hz0) +
          ",hzf=" + format_double(hzf) + ")";
  return Schedule({{0.0, 0.0, hz0}, {t1, hx_max, hz0}, {t2, hx_max, hzf}, {t3, 0.0, hzf}}, name);
}

inline Schedule make_anneal(AnnealVariant variant, double free_duration) {
  const AnnealParams p = anneal_defaults(variant, free_duration);
  return make_anneal(variant, p.t_rise, p.t_sweep, p.t_fall, p.hx_max, p.hz0, p.hzf);
}

inline Schedule make_quench(double hx, double hz, double t_f) {
  if (!(t_f > 0.0)) throw Error(ErrorCategory::schedule, "quench duration must be positive");
  return Schedule({{0.0, hx, hz}, {t_f, hx, hz}},
                  "quench(hx=" + format_double(hx) + ",hz=" + format_double(hz) + ",t_f=" + format_double(t_f) + ")");
}

/// Step grid that hits every record time exactly: between consecutive targets
/// the interval is split into equal sub-steps no longer than dt.
inline std::vector<double> step_grid(const std::vector<double>& record_times, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCategory::domain, "time step must be positive");
  std::vector<double> grid{0.0};
  for (double target : record_times) {
    const double t0 = grid.back();
    if (target < t0) throw Error(ErrorCategory::domain, "record times must be non-decreasing");
    if (target == t0) continue;
    const auto n = static_cast<long>(std::ceil((target - t0) / dt - 1e-9));
    for (long k = 1; k < n; ++k) grid.push_back(t0 + (target - t0) * static_cast<double>(k) / static_cast<double>(n));
    grid.push_back(target);
  }
  return grid;
}

/// Uniformly spaced record times 0, every, 2*every, ..., t_f (t_f always included).
inline std::vector<double> uniform_times(double t_f, double every) {
  if (!(every > 0.0)) throw Error(ErrorCategory::domain, "record interval must be positive");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor(t_f / every + 1e-9));
  for (long k = 0; k <= n; ++k) out.push_back(static_cast<double>(k) * every);
  if (t_f - out.back() > 1e-9 * std::max(1.0, t_f)) out.push_back(t_f);
  else out.back() = t_f;
  return out;
}

}  // namespace tfim
