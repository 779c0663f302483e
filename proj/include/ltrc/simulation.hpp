#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ltrc/error.hpp"
#include "ltrc/kv_config.hpp"
#include "ltrc/normal.hpp"
#include "ltrc/random.hpp"
#include "ltrc/sample.hpp"

namespace ltrc {

/// Data-generating design:
///   X_1 = 0.5 e_1,  X_{t+1} = rho X_t + 0.5 e_{t+1},  Y_t = m(X_t) + eps_t,
///   W_t ~ Exponential(rate a0),  T_t ~ Normal(u0, trunc_variance),
/// with m(x) = m_slope x + m_intercept and eps_t ~ Normal(0, sigma_noise^2).
/// A latent record is observed when T <= Z = min(Y, W).
struct SimConfig {
  double rho = 0.9;
  double sigma_noise = 0.1;
  double m_slope = 2.0;
  double m_intercept = 0.0;
  double a0 = 0.1;
  double u0 = -2.0;
  // Second parameter of the truncation normal, read as a variance.
  double trunc_variance = 2.0;
  std::size_t n = 300;
  std::uint64_t seed = 1;
  // Draw X_1 from the stationary law N(0, 0.25/(1 - rho^2)) instead of 0.5 e_1.
  bool stationary_start = false;

  double m(double x) const noexcept { return m_slope * x + m_intercept; }

  double stationary_x_variance() const noexcept { return 0.25 / (1.0 - rho * rho); }

  void validate() const {
    if (!(rho >= 0.0 && rho < 1.0)) throw InvalidConfig("rho must lie in [0,1)");
    if (!(sigma_noise > 0.0)) throw InvalidConfig("sigma_noise must be positive");
    if (!(a0 > 0.0)) throw InvalidConfig("a0 must be positive");
    if (!(trunc_variance > 0.0)) throw InvalidConfig("trunc_variance must be positive");
    if (n < 1) throw InvalidConfig("n must be at least 1");
  }

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {"rho", "sigma_noise", "m_slope", "m_intercept",
                                               "a0", "u0", "trunc_variance", "n", "seed",
                                               "stationary_start"};
    return k;
  }

  // Reads the keys above, leaving other keys to the caller.
  static SimConfig from_kv(const KeyValueConfig& kv) { return from_kv(kv, SimConfig()); }

  static SimConfig from_kv(const KeyValueConfig& kv, const SimConfig& base) {
    SimConfig c = base;
    c.rho = kv.get_double("rho", c.rho);
    c.sigma_noise = kv.get_double("sigma_noise", c.sigma_noise);
    c.m_slope = kv.get_double("m_slope", c.m_slope);
    c.m_intercept = kv.get_double("m_intercept", c.m_intercept);
    c.a0 = kv.get_double("a0", c.a0);
    c.u0 = kv.get_double("u0", c.u0);
    c.trunc_variance = kv.get_double("trunc_variance", c.trunc_variance);
    c.n = static_cast<std::size_t>(kv.get_uint("n", c.n));
    c.seed = kv.get_uint("seed", c.seed);
    c.stationary_start = kv.get_bool("stationary_start", c.stationary_start);
    c.validate();
    return c;
  }

  void to_kv(KeyValueConfig& kv) const {
    kv.set("rho", format_double(rho));
    kv.set("sigma_noise", format_double(sigma_noise));
    kv.set("m_slope", format_double(m_slope));
    kv.set("m_intercept", format_double(m_intercept));
    kv.set("a0", format_double(a0));
    kv.set("u0", format_double(u0));
    kv.set("trunc_variance", format_double(trunc_variance));
    kv.set("n", std::to_string(n));
    kv.set("seed", std::to_string(seed));
    kv.set("stationary_start", stationary_start ? "true" : "false");
  }

  std::string serialize() const {
    KeyValueConfig kv;
    to_kv(kv);
    return kv.to_string();
  }
};

struct LatentDraw {
  double x, y, t, w;
};

struct GenerationStats {
  std::size_t n_drawn = 0;
  double cr_realized = 0.0;  // censored fraction among observed records
  double tr_realized = 0.0;  // rejected fraction of latent draws
};

/// Sequential latent generator. The four innovation sequences come from
/// independent named sub-streams of the configured seed.
class LatentGenerator {
 public:
  explicit LatentGenerator(const SimConfig& cfg)
      : cfg_(cfg),
        cov_(cfg.seed, "covariate"),
        noise_(cfg.seed, "noise"),
        cens_(cfg.seed, "censoring"),
        trunc_(cfg.seed, "truncation") {
    cfg_.validate();
  }

  LatentDraw next() {
    const double e = cov_.normal();
    if (first_) {
      x_ = cfg_.stationary_start ? std::sqrt(cfg_.stationary_x_variance()) * e : 0.5 * e;
      first_ = false;
    } else {
      x_ = cfg_.rho * x_ + 0.5 * e;
    }
    LatentDraw d;
    d.x = x_;
    d.y = cfg_.m(x_) + cfg_.sigma_noise * noise_.normal();
    d.w = cens_.exponential() / cfg_.a0;
    d.t = cfg_.u0 + std::sqrt(cfg_.trunc_variance) * trunc_.normal();
    return d;
  }

 private:
  SimConfig cfg_;
  RandomStream cov_, noise_, cens_, trunc_;
  double x_ = 0.0;
  bool first_ = true;
};

inline std::vector<LatentDraw> gen_latent_stream(const SimConfig& cfg, std::size_t count) {
  if (count < 1) throw InvalidConfig("count must be at least 1");
  LatentGenerator gen(cfg);
  std::vector<LatentDraw> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(gen.next());
  return out;
}

inline constexpr std::size_t kMaxDrawsPerRecord = 1000000;

inline std::pair<LtrcSample, GenerationStats> gen_ltrc_sample(const SimConfig& cfg) {
  cfg.validate();
  LatentGenerator gen(cfg);
  std::vector<LtrcObservation> obs;
  obs.reserve(cfg.n);
  const std::size_t cap = kMaxDrawsPerRecord * cfg.n;
  std::size_t drawn = 0, censored = 0;
  while (obs.size() < cfg.n) {
    if (drawn >= cap) throw AcceptanceTooLow(obs.size(), drawn);
    const LatentDraw d = gen.next();
    ++drawn;
    const double z = std::min(d.y, d.w);
    if (d.t > z) continue;
    const int delta = d.y <= d.w ? 1 : 0;
    censored += delta == 0;
    obs.push_back(LtrcObservation{{d.x}, z, d.t, delta});
  }
  GenerationStats stats;
  stats.n_drawn = drawn;
  stats.cr_realized = static_cast<double>(censored) / static_cast<double>(cfg.n);
  stats.tr_realized = 1.0 - static_cast<double>(cfg.n) / static_cast<double>(drawn);
  return {validate_sample(std::move(obs)), stats};
}

// ---------------------------------------------------------------------------
// Rate calibration

/// Realized censoring and truncation rates of a fixed latent pilot under
/// varying (a0, u0). The pilot stores unit-rate exponentials and standard
/// normals, so W = E / a0 and T = u0 + s N reuse the same randomness for every
/// candidate and both rates move monotonically with their parameter.
class RatePilot {
 public:
  RatePilot(const SimConfig& tmpl, std::size_t draws) : sd_t_(std::sqrt(tmpl.trunc_variance)) {
    SimConfig unit = tmpl;
    unit.a0 = 1.0;
    unit.u0 = 0.0;
    unit.seed = derive_seed(tmpl.seed, "calibration-pilot");
    LatentGenerator gen(unit);
    y_.reserve(draws);
    e_.reserve(draws);
    nt_.reserve(draws);
    for (std::size_t k = 0; k < draws; ++k) {
      const LatentDraw d = gen.next();
      y_.push_back(d.y);
      e_.push_back(d.w);
      nt_.push_back(d.t / sd_t_);
    }
  }

  struct Rates {
    double cr = 0.0, tr = 0.0;
  };

  Rates rates(double a0, double u0) const {
    std::size_t kept = 0, cens = 0;
    for (std::size_t k = 0; k < y_.size(); ++k) {
      const double w = e_[k] / a0;
      const double z = std::min(y_[k], w);
      if (u0 + sd_t_ * nt_[k] > z) continue;
      ++kept;
      cens += y_[k] > w;
    }
    Rates r;
    r.tr = 1.0 - static_cast<double>(kept) / static_cast<double>(y_.size());
    r.cr = kept ? static_cast<double>(cens) / static_cast<double>(kept) : 0.0;
    return r;
  }

 private:
  double sd_t_;
  std::vector<double> y_, e_, nt_;
};

struct CalibrationOptions {
  std::size_t pilot_draws = 100000;
  double tolerance = 0.02;
  int min_passes = 2;
  int max_passes = 8;
  double a0_floor = 1e-4;
  double a0_ceiling = 1e3;
  double u0_left = -50.0;
  double u0_right = 50.0;
};

struct CalibrationResult {
  double a0 = 0.0;
  double u0 = 0.0;
  double cr_pilot = 0.0;
  double tr_pilot = 0.0;
  int passes = 0;
};

inline CalibrationResult calibrate_rates_detailed(double target_cr, double target_tr,
                                                  const SimConfig& tmpl,
                                                  const CalibrationOptions& opt = {}) {
  if (!(target_cr >= 0.0 && target_cr <= 0.9) || !(target_tr >= 0.0 && target_tr <= 0.9))
    throw InvalidConfig("calibration targets must lie in [0, 0.9]");
  const RatePilot pilot(tmpl, opt.pilot_draws);

  double a0 = target_cr == 0.0 ? opt.a0_floor : std::sqrt(opt.a0_floor * opt.a0_ceiling);
  double u0 = target_tr == 0.0 ? opt.u0_left : 0.0;

  auto solve_a0 = [&](double u) {
    if (target_cr == 0.0) return opt.a0_floor;
    double lo = std::log(opt.a0_floor), hi = std::log(opt.a0_ceiling);
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (pilot.rates(std::exp(mid), u).cr < target_cr)
        lo = mid;
      else
        hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
  };
  auto solve_u0 = [&](double a) {
    if (target_tr == 0.0) return opt.u0_left;
    double lo = opt.u0_left, hi = opt.u0_right;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (pilot.rates(a, mid).tr < target_tr)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };

  CalibrationResult res;
  for (int pass = 1; pass <= opt.max_passes; ++pass) {
    a0 = solve_a0(u0);
    u0 = solve_u0(a0);
    const auto r = pilot.rates(a0, u0);
    res = {a0, u0, r.cr, r.tr, pass};
    const bool ok = std::abs(r.cr - target_cr) <= opt.tolerance &&
                    std::abs(r.tr - target_tr) <= opt.tolerance;
    if (ok && pass >= opt.min_passes) return res;
  }
  throw CalibrationFailed("could not reach CR=" + format_double(target_cr) +
                          " TR=" + format_double(target_tr) + " (pilot CR=" +
                          format_double(res.cr_pilot) + " TR=" + format_double(res.tr_pilot) + ")");
}

inline std::pair<double, double> calibrate_rates(double target_cr, double target_tr,
                                                 const SimConfig& tmpl) {
  const auto r = calibrate_rates_detailed(target_cr, target_tr, tmpl);
  return {r.a0, r.u0};
}

}  // namespace ltrc
