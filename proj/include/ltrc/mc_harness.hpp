#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ltrc/error.hpp"
#include "ltrc/normal.hpp"
#include "ltrc/parallel.hpp"
#include "ltrc/random.hpp"
#include "ltrc/regression.hpp"
#include "ltrc/simulation.hpp"
#include "ltrc/survival.hpp"

namespace ltrc {

enum class BandwidthPolicy { fixed, lscv };

inline std::vector<double> default_x_grid() {
  std::vector<double> g;
  for (int k = -10; k <= 10; ++k) g.push_back(0.1 * k);
  return g;
}

// Geometric grid from 0.02 to 3.0.
inline std::vector<double> default_lscv_grid(std::size_t count = 30) {
  std::vector<double> g;
  for (std::size_t k = 0; k < count; ++k)
    g.push_back(0.02 * std::pow(150.0, static_cast<double>(k) / static_cast<double>(count - 1)));
  return g;
}

struct McConfig {
  SimConfig sim;
  EstimatorConfig est;
  std::size_t replications = 200;
  std::vector<double> x_grid = default_x_grid();
  double eta = 0.05;
  double eval_point = 0.0;
  BandwidthPolicy bandwidth_policy = BandwidthPolicy::lscv;
  std::vector<double> lscv_grid = default_lscv_grid();
  unsigned threads = 0;

  void validate() const {
    sim.validate();
    est.validate();
    if (replications < 1) throw InvalidConfig("replications must be at least 1");
    if (!(eta > 0.0 && eta < 1.0)) throw InvalidConfig("eta must lie in (0,1)");
    if (x_grid.empty()) throw InvalidConfig("x grid is empty");
    if (bandwidth_policy == BandwidthPolicy::lscv && lscv_grid.empty())
      throw InvalidConfig("LSCV grid is empty");
  }

  std::uint64_t replication_seed(std::size_t b) const { return derive_seed(sim.seed, b); }
};

struct PointEstimate {
  double m_hat, sigma_hat, ci_lo, ci_hi;
};

struct ReplicationResult {
  std::uint64_t seed = 0;
  double bandwidth = 0.0;
  GenerationStats generation;
  std::vector<std::optional<PointEstimate>> points;
  std::vector<std::string> point_failures;  // empty string when the point succeeded
  std::optional<double> mn;                 // normalized deviation at the eval point
  std::string failure;                      // whole-replication failure, if any
};

struct DensityCurve {
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> density;

  double trapezoid_mass() const {
    double m = 0.0;
    for (std::size_t k = 1; k < grid.size(); ++k)
      m += 0.5 * (density[k] + density[k - 1]) * (grid[k] - grid[k - 1]);
    return m;
  }
};

struct NormalityReport {
  double ks = 0.0;
  double ks_scaled = 0.0;  // sqrt(B) * ks
  std::size_t count = 0;
  // Asymptotic Kolmogorov critical values for sqrt(B) * ks.
  static constexpr double critical_10 = 1.224;
  static constexpr double critical_05 = 1.358;
  static constexpr double critical_01 = 1.628;
  bool reject_10() const { return ks_scaled > critical_10; }
  bool reject_05() const { return ks_scaled > critical_05; }
  bool reject_01() const { return ks_scaled > critical_01; }
};

struct BandPoint {
  double x, median_m_hat, median_ci_lo, median_ci_hi;
};

struct McReport {
  std::vector<double> x_grid;
  std::vector<double> mn_values;
  std::vector<double> coverage;
  std::vector<double> avg_width;
  std::vector<std::size_t> point_successes;
  std::vector<std::size_t> point_failures;
  double coverage_pooled = 0.0;
  double coverage_mean = 0.0;
  double avg_width_pooled = 0.0;
  double avg_width_mean = 0.0;
  std::optional<DensityCurve> density_curve;
  std::vector<std::pair<double, double>> qq_pairs;
  std::optional<NormalityReport> normality;
  std::vector<BandPoint> bands;
  std::size_t replications = 0;
  std::size_t failed_replications = 0;
  std::map<std::string, std::size_t> failure_reasons;  // tallied over point failures
  std::vector<std::uint64_t> seeds;
  std::vector<double> bandwidths;
  double mean_cr_realized = 0.0;
  double mean_tr_realized = 0.0;
};

// ---------------------------------------------------------------------------
// Distribution summaries of the normalized deviations

/// Gaussian kernel density estimate with bandwidth 1.6 * count^(-1/5) on a
/// 512-point grid spanning [min - 4h, max + 4h].
inline DensityCurve density_of_mn(std::span<const double> values, std::size_t count,
                                  std::size_t grid_points = 512) {
  if (values.empty()) throw InvalidConfig("density of an empty sample");
  DensityCurve c;
  c.bandwidth = 1.6 * std::pow(static_cast<double>(count), -0.2);
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn_it - 4.0 * c.bandwidth, hi = *mx_it + 4.0 * c.bandwidth;
  c.grid.resize(grid_points);
  c.density.assign(grid_points, 0.0);
  const double step = (hi - lo) / static_cast<double>(grid_points - 1);
  const double scale = 1.0 / (static_cast<double>(values.size()) * c.bandwidth);
  for (std::size_t k = 0; k < grid_points; ++k) {
    const double y = lo + step * static_cast<double>(k);
    c.grid[k] = y;
    double acc = 0.0;
    for (double v : values) acc += normal::pdf((y - v) / c.bandwidth);
    c.density[k] = acc * scale;
  }
  return c;
}

inline DensityCurve density_of_mn(std::span<const double> values) {
  return density_of_mn(values, values.size());
}

/// (Phi^{-1}((i - 0.5)/B), i-th smallest value) for i = 1..B.
inline std::vector<std::pair<double, double>> qq_data(std::span<const double> values) {
  if (values.empty()) throw InvalidConfig("QQ data of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double b = static_cast<double>(sorted.size());
  std::vector<std::pair<double, double>> out;
  out.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    out.emplace_back(normal::quantile((static_cast<double>(i) + 0.5) / b), sorted[i]);
  return out;
}

/// Kolmogorov-Smirnov distance of the sample to N(0,1).
inline NormalityReport normality_check(std::span<const double> values) {
  if (values.size() < 20) throw InvalidConfig("normality check needs at least 20 values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double b = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = normal::cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / b - f, f - static_cast<double>(i) / b});
  }
  NormalityReport r;
  r.ks = d;
  r.ks_scaled = std::sqrt(b) * d;
  r.count = sorted.size();
  return r;
}

// ---------------------------------------------------------------------------
// Campaign

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline ReplicationResult run_replication(const McConfig& cfg, std::size_t b) {
  ReplicationResult rep;
  rep.seed = cfg.replication_seed(b);
  rep.points.assign(cfg.x_grid.size(), std::nullopt);
  rep.point_failures.assign(cfg.x_grid.size(), std::string());
  try {
    SimConfig sim = cfg.sim;
    sim.seed = rep.seed;
    auto [sample, stats] = gen_ltrc_sample(sim);
    rep.generation = stats;
    const SurvivalFit fit = fit_survival(sample);
    EstimatorConfig est = cfg.est;
    if (cfg.bandwidth_policy == BandwidthPolicy::lscv)
      est.bandwidth = lscv_bandwidth(sample, fit, est, cfg.lscv_grid);
    rep.bandwidth = est.bandwidth;

    auto estimate = [&](double x) -> PointEstimate {
      const EstimateResult r = estimate_at(sample, fit, est, x, cfg.eta);
      return {r.m_hat, r.sigma_hat, r.ci_lo, r.ci_hi};
    };
    for (std::size_t k = 0; k < cfg.x_grid.size(); ++k) {
      try {
        rep.points[k] = estimate(cfg.x_grid[k]);
      } catch (const Error& e) {
        rep.point_failures[k] = error_code(e);
      }
    }
    try {
      const PointEstimate p = estimate(cfg.eval_point);
      if (p.sigma_hat > 0.0)
        rep.mn = std::sqrt(static_cast<double>(sample.n()) * est.bandwidth) / p.sigma_hat *
                 (p.m_hat - cfg.sim.m(cfg.eval_point));
    } catch (const Error&) {
    }
  } catch (const Error& e) {
    rep.failure = error_code(e);
    for (auto& f : rep.point_failures) f = rep.failure;
  }
  return rep;
}

/// Reduces replication results in index order. Points that failed in a
/// replication are left out of that point's averages.
inline McReport aggregate_replications(const McConfig& cfg, const std::vector<ReplicationResult>& reps) {
  McReport r;
  r.x_grid = cfg.x_grid;
  r.replications = reps.size();
  const std::size_t nx = cfg.x_grid.size();
  r.coverage.assign(nx, 0.0);
  r.avg_width.assign(nx, 0.0);
  r.point_successes.assign(nx, 0);
  r.point_failures.assign(nx, 0);
  std::size_t pooled_n = 0, pooled_cover = 0, generated = 0;
  double pooled_width = 0.0;
  std::vector<std::vector<double>> m_col(nx), lo_col(nx), hi_col(nx);

  for (const auto& rep : reps) {
    r.seeds.push_back(rep.seed);
    r.bandwidths.push_back(rep.bandwidth);
    if (!rep.failure.empty()) {
      ++r.failed_replications;
    } else {
      ++generated;
      r.mean_cr_realized += rep.generation.cr_realized;
      r.mean_tr_realized += rep.generation.tr_realized;
    }
    if (rep.mn) r.mn_values.push_back(*rep.mn);
    for (std::size_t k = 0; k < nx; ++k) {
      if (!rep.points[k]) {
        ++r.point_failures[k];
        ++r.failure_reasons[rep.point_failures[k]];
        continue;
      }
      const auto& p = *rep.points[k];
      const double truth = cfg.sim.m(cfg.x_grid[k]);
      const bool covered = p.ci_lo <= truth && truth <= p.ci_hi;
      const double width = p.ci_hi - p.ci_lo;
      ++r.point_successes[k];
      r.coverage[k] += covered;
      r.avg_width[k] += width;
      ++pooled_n;
      pooled_cover += covered;
      pooled_width += width;
      m_col[k].push_back(p.m_hat);
      lo_col[k].push_back(p.ci_lo);
      hi_col[k].push_back(p.ci_hi);
    }
  }
  if (pooled_n == 0) throw AllReplicationsFailed();

  std::size_t covered_points = 0;
  for (std::size_t k = 0; k < nx; ++k) {
    const std::size_t s = r.point_successes[k];
    if (s > 0) {
      r.coverage[k] /= static_cast<double>(s);
      r.avg_width[k] /= static_cast<double>(s);
      r.coverage_mean += r.coverage[k];
      r.avg_width_mean += r.avg_width[k];
      ++covered_points;
    } else {
      r.coverage[k] = std::nan("");
      r.avg_width[k] = std::nan("");
    }
    r.bands.push_back({cfg.x_grid[k], median_of(m_col[k]), median_of(lo_col[k]), median_of(hi_col[k])});
  }
  r.coverage_mean /= static_cast<double>(covered_points);
  r.avg_width_mean /= static_cast<double>(covered_points);
  r.coverage_pooled = static_cast<double>(pooled_cover) / static_cast<double>(pooled_n);
  r.avg_width_pooled = pooled_width / static_cast<double>(pooled_n);
  if (generated > 0) {
    r.mean_cr_realized /= static_cast<double>(generated);
    r.mean_tr_realized /= static_cast<double>(generated);
  }

  if (!r.mn_values.empty()) {
    r.density_curve = density_of_mn(r.mn_values, r.mn_values.size());
    r.qq_pairs = qq_data(r.mn_values);
    if (r.mn_values.size() >= 20) r.normality = normality_check(r.mn_values);
  }
  return r;
}

inline McReport run_campaign(const McConfig& cfg) {
  cfg.validate();
  std::vector<ReplicationResult> reps(cfg.replications);
  parallel_for(cfg.replications, resolve_threads(cfg.threads),
               [&](std::size_t b) { reps[b] = run_replication(cfg, b); });
  return aggregate_replications(cfg, reps);
}

// ---------------------------------------------------------------------------
// Table of coverage and widths over (TR, CR, n) cells

struct Table1Cell {
  double tr_percent = 20.0;
  double cr_percent = 10.0;
  std::size_t n = 50;
};

struct Table1Row {
  Table1Cell cell;
  double a0 = 0.0, u0 = 0.0;
  McReport report;
  std::string failure;  // set when the whole cell failed
};

inline std::vector<Table1Cell> table1_grid(const std::vector<double>& tr, const std::vector<double>& cr,
                                           const std::vector<std::size_t>& n) {
  std::vector<Table1Cell> out;
  for (double t : tr)
    for (double c : cr)
      for (std::size_t m : n) out.push_back({t, c, m});
  return out;
}

inline std::vector<Table1Row> run_table1(const std::vector<Table1Cell>& cells, const McConfig& tmpl) {
  std::map<std::pair<double, double>, std::pair<double, double>> calibrated;
  std::vector<Table1Row> rows;
  for (const auto& cell : cells) {
    Table1Row row;
    row.cell = cell;
    try {
      const auto key = std::make_pair(cell.tr_percent, cell.cr_percent);
      auto it = calibrated.find(key);
      if (it == calibrated.end())
        it = calibrated.emplace(key, calibrate_rates(cell.cr_percent / 100.0, cell.tr_percent / 100.0, tmpl.sim))
                 .first;
      row.a0 = it->second.first;
      row.u0 = it->second.second;
      McConfig cfg = tmpl;
      cfg.sim.a0 = row.a0;
      cfg.sim.u0 = row.u0;
      cfg.sim.n = cell.n;
      row.report = run_campaign(cfg);
    } catch (const Error& e) {
      row.failure = error_code(e) + ": " + e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ltrc
