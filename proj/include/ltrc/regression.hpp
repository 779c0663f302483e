#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ltrc/error.hpp"
#include "ltrc/kernel.hpp"
#include "ltrc/normal.hpp"
#include "ltrc/sample.hpp"
#include "ltrc/survival.hpp"

namespace ltrc {

struct EstimatorConfig {
  Kernel kernel = Kernel::gaussian();
  Objective psi = Objective::pseudo_huber();
  double bandwidth = 1.0;
  // Records with Z above this bound get no weight. Unset means max observed Z.
  std::optional<double> support_bound;
  double root_tol = 1e-10;
  int root_max_iter = 200;
  double bracket_pad = 1.0;
  // Smallest number of weighted records for which an estimate is reported.
  std::size_t min_effective = 5;

  void validate() const {
    if (!(bandwidth > 0.0)) throw InvalidConfig("bandwidth must be positive");
    if (!(root_tol > 0.0)) throw InvalidConfig("root_tol must be positive");
    if (root_max_iter < 1) throw InvalidConfig("root_max_iter must be at least 1");
    if (!(bracket_pad > 0.0)) throw InvalidConfig("bracket_pad must be positive");
  }
};

/// Inverse-probability weights of the kernel score at one evaluation point:
/// w_i = mu_n K((x - X_i)/h) delta_i / (L_n(Z_i) Gbar_n(Z_i) n h^d), kept only
/// when positive. The score is then sum_i w_i psi(Z_i - theta).
struct WeightedScore {
  std::vector<double> eval_point;
  std::vector<double> weights;  // one per observation, zero when excluded
  std::vector<std::size_t> kept_idx;
  std::vector<double> kept_z;
  std::vector<double> kept_w;
  std::vector<double> kept_guard;  // L_n(Z_i) Gbar_n(Z_i)
  double mu = 1.0;
  double norm = 1.0;  // n h^d

  std::size_t n_effective() const noexcept { return kept_idx.size(); }
};

struct RootDiagnostics {
  int iterations = 0;
  int expansions = 0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
};

struct EstimateResult {
  double m_hat = 0.0;
  double sigma_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_effective = 0;
  RootDiagnostics diagnostics;
};

namespace detail {

inline double support_bound(const LtrcSample& s, const EstimatorConfig& cfg) {
  return cfg.support_bound.value_or(s.max_z());
}

inline double kernel_at(const EstimatorConfig& cfg, std::span<const double> x,
                        std::span<const double> xi) {
  if (x.size() == 1) return cfg.kernel((x[0] - xi[0]) / cfg.bandwidth);
  thread_local std::vector<double> u;
  u.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) u[k] = (x[k] - xi[k]) / cfg.bandwidth;
  return cfg.kernel(u);
}

// L_n(Z_i) Gbar_n(Z_i) if record i may carry weight, 0 otherwise.
inline double guard(const LtrcSample& s, const SurvivalFit& fit, double bound, std::size_t i) {
  const auto& o = s[i];
  if (o.delta != 1 || o.z > bound) return 0.0;
  return fit.l_n.eval(o.z) * fit.survival_g(o.z);
}

inline void check_dim(const LtrcSample& s, std::span<const double> x) {
  if (x.size() != s.dim()) throw InvalidConfig("evaluation point has wrong dimension");
}

}  // namespace detail

inline WeightedScore build_score(const LtrcSample& s, const SurvivalFit& fit,
                                 const EstimatorConfig& cfg, std::span<const double> x) {
  cfg.validate();
  detail::check_dim(s, x);
  WeightedScore score;
  score.eval_point.assign(x.begin(), x.end());
  score.weights.assign(s.n(), 0.0);
  score.mu = fit.mu_n;
  score.norm = static_cast<double>(s.n()) * std::pow(cfg.bandwidth, static_cast<double>(s.dim()));
  const double bound = detail::support_bound(s, cfg);
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double g = detail::guard(s, fit, bound, i);
    if (g == 0.0) continue;
    const double w = fit.mu_n * detail::kernel_at(cfg, x, s[i].x) / (g * score.norm);
    if (!(w > 0.0)) continue;
    score.weights[i] = w;
    score.kept_idx.push_back(i);
    score.kept_z.push_back(s[i].z);
    score.kept_w.push_back(w);
    score.kept_guard.push_back(g);
  }
  if (score.kept_idx.empty()) throw NoEffectiveData();
  return score;
}

inline WeightedScore build_score(const LtrcSample& s, const SurvivalFit& fit,
                                 const EstimatorConfig& cfg, double x) {
  return build_score(s, fit, cfg, std::span<const double>(&x, 1));
}

namespace detail {

inline double score_sum(std::span<const double> z, std::span<const double> w, const Objective& psi,
                        double theta) noexcept {
  double acc = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) acc += w[k] * psi.base(z[k] - theta);
  return psi.scale() * acc;
}

// Bisection on a score that is positive left of the root and negative right
// of it. Starts from [min z - pad, max z + pad] and doubles the width until
// the signs bracket a root.
inline double bisect_root(std::span<const double> z, std::span<const double> w,
                          const Objective& psi, double tol, int max_iter, double pad,
                          RootDiagnostics* diag) {
  auto [zmin_it, zmax_it] = std::minmax_element(z.begin(), z.end());
  const double zmin = *zmin_it, zmax = *zmax_it;
  RootDiagnostics d;
  if (zmin == zmax) {
    // psi is odd, so every term vanishes exactly at the common value.
    d.bracket_lo = d.bracket_hi = zmin;
    if (diag) *diag = d;
    return zmin;
  }
  double lo = zmin - pad, hi = zmax + pad;
  double f_lo = score_sum(z, w, psi, lo), f_hi = score_sum(z, w, psi, hi);
  while (!(f_lo > 0.0 && f_hi < 0.0)) {
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if (++d.expansions > 60) throw BracketFailure();
    const double width = hi - lo;
    lo -= width;
    hi += width;
    f_lo = score_sum(z, w, psi, lo);
    f_hi = score_sum(z, w, psi, hi);
  }
  d.bracket_lo = lo;
  d.bracket_hi = hi;
  double mid = 0.5 * (lo + hi);
  while (hi - lo > tol && d.iterations < max_iter) {
    ++d.iterations;
    mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f = score_sum(z, w, psi, mid);
    if (f == 0.0) break;
    if (f > 0.0)
      lo = mid;
    else
      hi = mid;
    mid = 0.5 * (lo + hi);
  }
  if (diag) *diag = d;
  return mid;
}

}  // namespace detail

inline double score_value(const WeightedScore& score, const EstimatorConfig& cfg, double theta) {
  return detail::score_sum(score.kept_z, score.kept_w, cfg.psi, theta);
}

inline double solve_m_hat(const WeightedScore& score, const EstimatorConfig& cfg,
                          RootDiagnostics* diag = nullptr) {
  if (score.kept_idx.empty()) throw NoEffectiveData();
  return detail::bisect_root(score.kept_z, score.kept_w, cfg.psi, cfg.root_tol, cfg.root_max_iter,
                             cfg.bracket_pad, diag);
}

/// -sum_i w_i psi'(Z_i - theta), the theta-derivative of the score.
inline double estimate_score_derivative(const WeightedScore& score, const EstimatorConfig& cfg,
                                        double theta) {
  if (score.kept_idx.empty()) throw NoEffectiveData();
  double acc = 0.0;
  for (std::size_t k = 0; k < score.kept_z.size(); ++k)
    acc += score.kept_w[k] * cfg.psi.base_derivative(score.kept_z[k] - theta);
  return -cfg.psi.scale() * acc;
}

/// (mu_n / (n h^d)) sum_i K delta_i psi^2(Z_i - theta) / (L_n Gbar_n)^2.
inline double estimate_gamma(const WeightedScore& score, const EstimatorConfig& cfg, double theta) {
  if (score.kept_idx.empty()) throw NoEffectiveData();
  double acc = 0.0;
  for (std::size_t k = 0; k < score.kept_z.size(); ++k) {
    const double p = cfg.psi.base(score.kept_z[k] - theta);
    acc += score.kept_w[k] * p * p / score.kept_guard[k];
  }
  return cfg.psi.scale() * cfg.psi.scale() * acc;
}

/// sigma_hat^2 = mu_n Gamma_hat kappa / (dPsi_hat/dtheta)^2 at theta = m_hat.
inline double estimate_sigma(const WeightedScore& score, const EstimatorConfig& cfg, double m_hat) {
  const double deriv = estimate_score_derivative(score, cfg, m_hat);
  if (deriv == 0.0 || !std::isfinite(deriv)) throw DegenerateDerivative();
  const double gamma = estimate_gamma(score, cfg, m_hat);
  const double kappa = cfg.kernel.squared_integral(score.eval_point.size());
  // Divide after the square root so a tiny derivative cannot underflow to 0.
  const double sigma = std::sqrt(score.mu * gamma * kappa) / std::abs(deriv);
  if (!std::isfinite(sigma)) throw DegenerateDerivative();
  return sigma;
}

inline std::pair<double, double> confidence_interval(double m_hat, double sigma_hat, double eta,
                                                     std::size_t n, double bandwidth,
                                                     std::size_t dim = 1) {
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidConfig("eta must lie in (0,1)");
  const double t = normal::quantile(1.0 - eta / 2.0);
  const double half =
      t * sigma_hat / std::sqrt(static_cast<double>(n) * std::pow(bandwidth, static_cast<double>(dim)));
  return {m_hat - half, m_hat + half};
}

// Convenience overloads evaluating at a point directly from the sample.

inline double estimate_score_derivative(const LtrcSample& s, const SurvivalFit& fit,
                                        const EstimatorConfig& cfg, double x, double theta) {
  return estimate_score_derivative(build_score(s, fit, cfg, x), cfg, theta);
}

inline double estimate_gamma(const LtrcSample& s, const SurvivalFit& fit,
                             const EstimatorConfig& cfg, double x, double theta) {
  return estimate_gamma(build_score(s, fit, cfg, x), cfg, theta);
}

inline double estimate_sigma(const LtrcSample& s, const SurvivalFit& fit,
                             const EstimatorConfig& cfg, double x, double m_hat) {
  return estimate_sigma(build_score(s, fit, cfg, x), cfg, m_hat);
}

/// Full pipeline at one point: root, plug-in sigma and the (1 - eta) interval.
inline EstimateResult estimate_at(const LtrcSample& s, const SurvivalFit& fit,
                                  const EstimatorConfig& cfg, std::span<const double> x,
                                  double eta) {
  const WeightedScore score = build_score(s, fit, cfg, x);
  if (score.n_effective() < cfg.min_effective)
    throw NotEstimable(score.n_effective(), cfg.min_effective);
  EstimateResult r;
  r.n_effective = score.n_effective();
  r.m_hat = solve_m_hat(score, cfg, &r.diagnostics);
  r.sigma_hat = estimate_sigma(score, cfg, r.m_hat);
  std::tie(r.ci_lo, r.ci_hi) =
      confidence_interval(r.m_hat, r.sigma_hat, eta, s.n(), cfg.bandwidth, s.dim());
  return r;
}

inline EstimateResult estimate_at(const LtrcSample& s, const SurvivalFit& fit,
                                  const EstimatorConfig& cfg, double x, double eta) {
  return estimate_at(s, fit, cfg, std::span<const double>(&x, 1), eta);
}

// ---------------------------------------------------------------------------
// Closed-form estimators for the identity objective.

/// sum K delta Z / (L_n Gbar_n) over sum K delta / (L_n Gbar_n).
inline double classical_m_hat(const LtrcSample& s, const SurvivalFit& fit,
                              const EstimatorConfig& cfg, std::span<const double> x,
                              bool ignore_truncation = false) {
  cfg.validate();
  detail::check_dim(s, x);
  const double bound = detail::support_bound(s, cfg);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const auto& o = s[i];
    if (o.delta != 1 || o.z > bound) continue;
    const double g = (ignore_truncation ? 1.0 : fit.l_n.eval(o.z)) * fit.survival_g(o.z);
    if (g == 0.0) continue;
    const double k = detail::kernel_at(cfg, x, o.x) / g;
    num += k * o.z;
    den += k;
  }
  if (!(den > 0.0)) throw NoEffectiveData();
  return num / den;
}

inline double classical_m_hat(const LtrcSample& s, const SurvivalFit& fit,
                              const EstimatorConfig& cfg, double x) {
  return classical_m_hat(s, fit, cfg, std::span<const double>(&x, 1));
}

/// Censoring-adjusted Nadaraya-Watson: the closed form with L_n taken as 1.
inline double adjusted_nw_m_hat(const LtrcSample& s, const SurvivalFit& fit,
                                const EstimatorConfig& cfg, double x) {
  return classical_m_hat(s, fit, cfg, std::span<const double>(&x, 1), true);
}

/// sum K delta Z / Gbar_n over the unweighted kernel mass sum K.
inline double carbonez_m_hat(const LtrcSample& s, const SurvivalFit& fit,
                             const EstimatorConfig& cfg, std::span<const double> x) {
  cfg.validate();
  detail::check_dim(s, x);
  const double bound = detail::support_bound(s, cfg);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const auto& o = s[i];
    const double k = detail::kernel_at(cfg, x, o.x);
    den += k;
    if (o.delta != 1 || o.z > bound) continue;
    const double g = fit.survival_g(o.z);
    if (g == 0.0) continue;
    num += k * o.z / g;
  }
  if (!(den > 0.0)) throw NoEffectiveData();
  return num / den;
}

inline double carbonez_m_hat(const LtrcSample& s, const SurvivalFit& fit,
                             const EstimatorConfig& cfg, double x) {
  return carbonez_m_hat(s, fit, cfg, std::span<const double>(&x, 1));
}

/// Score built from the true mu, L and Gbar (simulation settings only).
inline double oracle_score(const LtrcSample& s, double true_mu,
                           const std::function<double(double)>& true_l,
                           const std::function<double(double)>& true_gbar,
                           const EstimatorConfig& cfg, std::span<const double> x, double theta) {
  cfg.validate();
  detail::check_dim(s, x);
  const double norm = static_cast<double>(s.n()) * std::pow(cfg.bandwidth, static_cast<double>(s.dim()));
  double acc = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const auto& o = s[i];
    if (o.delta != 1) continue;
    const double g = true_l(o.z) * true_gbar(o.z);
    if (!(g > 0.0)) continue;
    acc += detail::kernel_at(cfg, x, o.x) * cfg.psi.base(o.z - theta) / g;
  }
  return true_mu * cfg.psi.scale() * acc / norm;
}

inline double oracle_score(const LtrcSample& s, double true_mu,
                           const std::function<double(double)>& true_l,
                           const std::function<double(double)>& true_gbar,
                           const EstimatorConfig& cfg, double x, double theta) {
  return oracle_score(s, true_mu, true_l, true_gbar, cfg, std::span<const double>(&x, 1), theta);
}

// ---------------------------------------------------------------------------
// Least-squares cross-validation

/// CV(h) = sum_i w_i (Z_i - m_{-i}(X_i))^2 with w_i = delta_i / (L_n Gbar_n)(Z_i),
/// where m_{-i} is the M-estimator refitted without record i. The survival fit
/// stays fixed across folds.
inline double lscv_criterion(const LtrcSample& s, const SurvivalFit& fit,
                             const EstimatorConfig& cfg) {
  cfg.validate();
  const double bound = detail::support_bound(s, cfg);
  std::vector<std::size_t> kept;
  std::vector<double> guard;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double g = detail::guard(s, fit, bound, i);
    if (g == 0.0) continue;
    kept.push_back(i);
    guard.push_back(g);
  }
  if (kept.size() < 2) throw NoEffectiveData("cross-validation needs two weighted records");

  const std::size_t m = kept.size();
  std::vector<double> z(m), w(m);
  double cv = 0.0;
  std::size_t folds = 0;
  for (std::size_t a = 0; a < m; ++a) {
    std::size_t used = 0;
    for (std::size_t b = 0; b < m; ++b) {
      if (b == a) continue;
      const double k = detail::kernel_at(cfg, s[kept[a]].x, s[kept[b]].x) / guard[b];
      if (!(k > 0.0)) continue;
      z[used] = s[kept[b]].z;
      w[used] = k;
      ++used;
    }
    if (used == 0) continue;
    const double fitted = detail::bisect_root(std::span(z.data(), used), std::span(w.data(), used),
                                              cfg.psi, cfg.root_tol, cfg.root_max_iter,
                                              cfg.bracket_pad, nullptr);
    const double r = s[kept[a]].z - fitted;
    cv += r * r / guard[a];
    ++folds;
  }
  if (folds == 0) return std::numeric_limits<double>::infinity();
  return cv;
}

struct LscvResult {
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> criterion;
};

inline LscvResult lscv_select(const LtrcSample& s, const SurvivalFit& fit,
                              const EstimatorConfig& cfg_template, std::span<const double> grid) {
  if (grid.empty()) throw InvalidConfig("bandwidth grid is empty");
  LscvResult out;
  out.grid.assign(grid.begin(), grid.end());
  double best = std::numeric_limits<double>::infinity(), best_h = 0.0;
  bool have = false;
  for (double h : grid) {
    EstimatorConfig cfg = cfg_template;
    cfg.bandwidth = h;
    const double cv = lscv_criterion(s, fit, cfg);
    out.criterion.push_back(cv);
    if (!have || cv < best || (cv == best && h < best_h)) {
      best = cv;
      best_h = h;
      have = true;
    }
  }
  out.bandwidth = best_h;
  return out;
}

inline double lscv_bandwidth(const LtrcSample& s, const SurvivalFit& fit,
                             const EstimatorConfig& cfg_template, std::span<const double> grid) {
  return lscv_select(s, fit, cfg_template, grid).bandwidth;
}

}  // namespace ltrc
