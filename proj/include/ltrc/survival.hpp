#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "ltrc/error.hpp"
#include "ltrc/sample.hpp"
#include "ltrc/step_function.hpp"

namespace ltrc {

/// Every distribution-function estimator computed from one LTRC sample.
///
/// `c_n` is the right-continuous version of the risk-set proportion and is
/// kept for export only: C_n itself is left-continuous at Z values, so exact
/// evaluation goes through `risk_proportion(sample, y)`.
struct SurvivalFit {
  StepFunction c_n;
  StepFunction h_n_emp;  // empirical d.f. of Z
  StepFunction l_n_emp;  // empirical d.f. of T
  StepFunction h_n_lb;   // Lynden-Bell estimator of the d.f. of Z
  StepFunction f_n;      // product-limit estimator of the lifetime d.f.
  StepFunction g_n;      // product-limit estimator of the censoring d.f.
  StepFunction l_n;      // Lynden-Bell estimator of the truncation d.f.
  StepFunction lambda_n;  // cumulative hazard of the lifetime
  double mu_n = 1.0;

  double survival_g(double y) const noexcept { return 1.0 - g_n.eval(y); }
};

namespace detail {

inline StepFunction ecdf(std::span<const double> sorted) {
  std::vector<double> pts, vals;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (k + 1 < sorted.size() && sorted[k + 1] == sorted[k]) continue;
    pts.push_back(sorted[k]);
    vals.push_back(static_cast<double>(k + 1) / n);
  }
  return StepFunction(std::move(pts), std::move(vals), 0.0);
}

enum class ZFactors { uncensored, censored, all };

// 1 - prod_{i: Z_i <= y} (1 - [selected_i] / (n C_n(Z_i))), walking Z in
// sorted order with ties taken in input order.
inline StepFunction product_limit_over_z(const LtrcSample& s, ZFactors which) {
  std::vector<double> pts, vals;
  const auto order = s.z_order();
  double surv = 1.0;
  std::size_t k = 0;
  while (k < order.size()) {
    const double z = s[order[k]].z;
    const double r = static_cast<double>(s.risk_set(z));
    bool touched = false;
    for (; k < order.size() && s[order[k]].z == z; ++k) {
      const int delta = s[order[k]].delta;
      const bool sel = which == ZFactors::all ||
                       (which == ZFactors::uncensored ? delta == 1 : delta == 0);
      if (!sel) continue;
      surv *= 1.0 - 1.0 / r;
      touched = true;
    }
    if (touched) {
      pts.push_back(z);
      vals.push_back(1.0 - surv);
    }
  }
  return StepFunction(std::move(pts), std::move(vals), 0.0);
}

}  // namespace detail

inline std::pair<StepFunction, StepFunction> fit_empirical_cdfs(const LtrcSample& s) {
  return {detail::ecdf(s.z_sorted()), detail::ecdf(s.t_sorted())};
}

inline StepFunction fit_tjw_f(const LtrcSample& s) {
  return detail::product_limit_over_z(s, detail::ZFactors::uncensored);
}

inline StepFunction fit_tjw_g(const LtrcSample& s) {
  return detail::product_limit_over_z(s, detail::ZFactors::censored);
}

inline StepFunction fit_lynden_bell_h(const LtrcSample& s) {
  return detail::product_limit_over_z(s, detail::ZFactors::all);
}

/// L_n(y) = prod_{i: T_i > y} (1 - 1/(n C_n(T_i))); equals 1 from max T on.
inline StepFunction fit_lynden_bell_l(const LtrcSample& s) {
  const auto ts = s.t_sorted();
  std::vector<double> pts, vals;
  double prod = 1.0;
  std::size_t k = ts.size();
  while (k > 0) {
    const double t = ts[k - 1];
    pts.push_back(t);
    vals.push_back(prod);
    const double r = static_cast<double>(s.risk_set(t));
    for (; k > 0 && ts[k - 1] == t; --k) prod *= 1.0 - 1.0 / r;
  }
  std::reverse(pts.begin(), pts.end());
  std::reverse(vals.begin(), vals.end());
  return StepFunction(std::move(pts), std::move(vals), prod);
}

inline StepFunction fit_cumulative_hazard(const LtrcSample& s) {
  std::vector<double> pts, vals;
  const auto order = s.z_order();
  double cum = 0.0;
  std::size_t k = 0;
  while (k < order.size()) {
    const double z = s[order[k]].z;
    const double r = static_cast<double>(s.risk_set(z));
    bool touched = false;
    for (; k < order.size() && s[order[k]].z == z; ++k) {
      if (s[order[k]].delta != 1) continue;
      cum += 1.0 / r;
      touched = true;
    }
    if (touched) {
      pts.push_back(z);
      vals.push_back(cum);
    }
  }
  return StepFunction(std::move(pts), std::move(vals), 0.0);
}

inline StepFunction fit_risk_proportion(const LtrcSample& s) {
  std::vector<double> pts;
  pts.reserve(2 * s.n());
  for (double t : s.t_sorted()) pts.push_back(t);
  for (double z : s.z_sorted()) pts.push_back(z);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<double> vals;
  vals.reserve(pts.size());
  const double n = static_cast<double>(s.n());
  // Right limit at each point: count at the point minus records whose Z sits on it.
  for (double p : pts) {
    auto z_le = std::upper_bound(s.z_sorted().begin(), s.z_sorted().end(), p) -
                std::lower_bound(s.z_sorted().begin(), s.z_sorted().end(), p);
    vals.push_back(static_cast<double>(s.risk_set(p) - static_cast<std::size_t>(z_le)) / n);
  }
  return StepFunction(std::move(pts), std::move(vals), 0.0);
}

/// L_n(y) (1 - H_n(y-)) / C_n(y), using the left limit of the Lynden-Bell H_n.
inline double estimate_mu(const LtrcSample& s, const SurvivalFit& fit, double y) {
  const std::size_t r = s.risk_set(y);
  if (r == 0) throw ZeroRiskSet(y);
  const double c = static_cast<double>(r) / static_cast<double>(s.n());
  // Tied data can push this slightly above 1.
  return fit.l_n.eval(y) * (1.0 - fit.h_n_lb.eval_left(y)) / c;
}

inline constexpr double kMuInvarianceTol = 1e-9;

/// Evaluates estimate_mu at every observed Z and returns the mean.
///
/// Without ties inside the Z values or inside the T values every evaluation
/// agrees exactly (up to rounding); a spread beyond 1e-9 then means a bug and
/// raises InvarianceViolation. Tied data breaks the identity, so the check is
/// skipped there.
inline double default_mu(const LtrcSample& s, const SurvivalFit& fit) {
  double lo = 1e300, hi = -1e300, sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double z = s[i].z;
    if (s.risk_set(z) == 0) continue;
    const double v = estimate_mu(s, fit, z);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
    ++count;
  }
  if (count == 0) throw ZeroRiskSet(s.min_z());
  if (!s.has_tied_z() && !s.has_tied_t() && hi - lo > kMuInvarianceTol)
    throw InvarianceViolation(hi - lo);
  return sum / static_cast<double>(count);
}

inline SurvivalFit fit_survival(const LtrcSample& s) {
  SurvivalFit fit;
  fit.c_n = fit_risk_proportion(s);
  std::tie(fit.h_n_emp, fit.l_n_emp) = fit_empirical_cdfs(s);
  fit.h_n_lb = fit_lynden_bell_h(s);
  fit.f_n = fit_tjw_f(s);
  fit.g_n = fit_tjw_g(s);
  fit.l_n = fit_lynden_bell_l(s);
  fit.lambda_n = fit_cumulative_hazard(s);
  fit.mu_n = default_mu(s, fit);
  for (const StepFunction* df : {&fit.f_n, &fit.g_n, &fit.l_n, &fit.h_n_lb})
    if (!df->is_nondecreasing() || !df->within(0.0, 1.0))
      throw std::logic_error("fit_survival: estimator left [0,1] or decreased");
  if (!fit.lambda_n.is_nondecreasing())
    throw std::logic_error("fit_survival: cumulative hazard decreased");
  return fit;
}

// ---------------------------------------------------------------------------
// Sup-norm distances

inline double sup_distance(const StepFunction& a, const StepFunction& b, double lo, double hi) {
  if (!(lo <= hi)) throw InvalidInterval(lo, hi);
  double best = std::abs(a.eval(lo) - b.eval(lo));
  auto scan = [&](std::span<const double> pts) {
    auto first = std::upper_bound(pts.begin(), pts.end(), lo);
    auto last = std::upper_bound(pts.begin(), pts.end(), hi);
    for (auto it = first; it != last; ++it) best = std::max(best, std::abs(a.eval(*it) - b.eval(*it)));
  };
  scan(a.jump_points());
  scan(b.jump_points());
  return best;
}

inline constexpr std::size_t kSupDistanceGrid = 10000;

/// Step function against a continuous d.f. Exact when `b` is monotone: on each
/// constant piece of `a` the largest gap sits at a piece end. A uniform grid
/// is added for non-monotone targets.
inline double sup_distance(const StepFunction& a, const std::function<double(double)>& b,
                           double lo, double hi, std::size_t grid_points = kSupDistanceGrid) {
  if (!(lo <= hi)) throw InvalidInterval(lo, hi);
  double best = std::max(std::abs(a.eval(lo) - b(lo)), std::abs(a.eval(hi) - b(hi)));
  const auto pts = a.jump_points();
  auto first = std::lower_bound(pts.begin(), pts.end(), lo);
  auto last = std::upper_bound(pts.begin(), pts.end(), hi);
  for (auto it = first; it != last; ++it) {
    const double bp = b(*it);
    best = std::max(best, std::abs(a.eval(*it) - bp));
    if (*it > lo) best = std::max(best, std::abs(a.eval_left(*it) - bp));
  }
  if (grid_points > 1 && hi > lo) {
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    for (std::size_t k = 0; k < grid_points; ++k) {
      const double y = lo + step * static_cast<double>(k);
      best = std::max(best, std::abs(a.eval(y) - b(y)));
    }
  }
  return best;
}

}  // namespace ltrc
