#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ltrc/regression.hpp"
#include "ltrc/simulation.hpp"
#include "support/oracles.hpp"

using namespace ltrc;
using Catch::Approx;

namespace {

LtrcSample make(std::vector<double> x, std::vector<double> t, std::vector<double> z, std::vector<int> d = {}) {
  std::vector<LtrcObservation> obs;
  for (std::size_t i = 0; i < t.size(); ++i) obs.push_back({{x[i]}, z[i], t[i], d.empty() ? 1 : d[i]});
  return validate_sample(std::move(obs));
}

EstimatorConfig identity_cfg(double h = 1.0) {
  EstimatorConfig c;
  c.psi = Objective::identity();
  c.bandwidth = h;
  return c;
}

EstimatorConfig huber_cfg(double h = 1.0) {
  EstimatorConfig c;
  c.bandwidth = h;
  return c;
}

// Uncensored sample with truncation far below every lifetime.
LtrcSample untruncated(std::mt19937_64& rng, std::size_t n) { return oracle::random_sample(rng, n, 0.0, false); }

// Hand sample: T = 0, Z = (1, 2, 3), delta = (1, 0, 1), X = (0, 0.5, 1).
// G_n jumps to 1/2 at Z = 2, L_n = 1 on [0, inf), mu_n = 1.
LtrcSample hand3() { return make({0.0, 0.5, 1.0}, {0, 0, 0}, {1, 2, 3}, {1, 0, 1}); }

}  // namespace

TEST_CASE("configuration checks", "[regression]") {
  EstimatorConfig c;
  c.bandwidth = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  c.bandwidth = 1.0;
  c.root_tol = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  CHECK_THROWS_AS(Objective::identity().scaled(-1.0), InvalidConfig);
  CHECK_THROWS_AS(Kernel::from_name("box"), InvalidConfig);
  CHECK_THROWS_AS(Objective::from_name("tukey"), InvalidConfig);
}

TEST_CASE("kernels integrate to one and psi is increasing", "[regression][kernel]") {
  for (const auto& k : {Kernel::gaussian(), Kernel::epanechnikov()}) {
    const double mass = oracle::simpson([&](double u) { return k(u); }, -12.0, 12.0, 24000);
    CHECK(mass == Approx(1.0).margin(1e-6));
    const double k2 = oracle::simpson([&](double u) { return k(u) * k(u); }, -12.0, 12.0, 24000);
    CHECK(k.squared_integral(1) == Approx(k2).margin(1e-6));
  }
  CHECK(Kernel::gaussian().squared_integral(1) == Approx(0.2820948).margin(1e-7));
  const std::vector<double> u = {0.3, -1.2};
  CHECK(Kernel::gaussian()(u) == Approx(oracle::gauss(0.3) * oracle::gauss(-1.2)).epsilon(1e-14));
  const auto psi = Objective::pseudo_huber();
  for (int k = -100; k < 100; ++k) CHECK(psi(0.1 * k) < psi(0.1 * (k + 1)));
  CHECK(psi(0.0) == 0.0);
  CHECK(psi.derivative(0.0) == 1.0);
}

TEST_CASE("score weights: one-point and degenerate cases", "[regression]") {
  const auto one = make({0.4}, {-1.0}, {2.0});
  const auto fit1 = fit_survival(one);
  const auto cfg = huber_cfg(0.7);
  const auto sc = build_score(one, fit1, cfg, 0.4);
  REQUIRE(sc.n_effective() == 1);
  CHECK(sc.weights[0] == Approx(fit1.mu_n * oracle::gauss(0.0) / 0.7).epsilon(1e-14));
  CHECK(sc.weights[0] > 0.0);

  const auto cens = make({0.0, 1.0}, {0, 0}, {1, 2}, {0, 0});
  CHECK_THROWS_AS(build_score(cens, fit_survival(cens), cfg, 0.0), NoEffectiveData);

  std::mt19937_64 rng(4);
  const auto s = untruncated(rng, 40);
  const auto fit = fit_survival(s);
  CHECK(fit.mu_n == Approx(1.0).margin(1e-12));
  const auto w = build_score(s, fit, cfg, 0.2);
  for (std::size_t i = 0; i < s.n(); ++i)
    CHECK(w.weights[i] == Approx(oracle::gauss((0.2 - s[i].x[0]) / 0.7) / (40 * 0.7)).epsilon(1e-12));
}

TEST_CASE("score evaluation", "[regression]") {
  const auto one = make({0.0}, {0.0}, {1.5});
  const auto fit = fit_survival(one);
  const auto cfg = huber_cfg();
  const auto sc = build_score(one, fit, cfg, 0.0);
  CHECK(score_value(sc, cfg, 1.5) == 0.0);

  std::mt19937_64 rng(9);
  const auto s = oracle::random_sample(rng, 30);
  const auto f = fit_survival(s);
  const auto w = build_score(s, f, cfg, 0.0);
  const auto [lo, hi] = std::minmax_element(w.kept_z.begin(), w.kept_z.end());
  CHECK(score_value(w, cfg, *lo - 0.1) > 0.0);
  CHECK(score_value(w, cfg, *hi + 0.1) < 0.0);

  const auto id = identity_cfg();
  const auto wi = build_score(s, f, id, 0.0);
  double sw = 0, swz = 0;
  for (std::size_t k = 0; k < wi.kept_z.size(); ++k) {
    sw += wi.kept_w[k];
    swz += wi.kept_w[k] * wi.kept_z[k];
  }
  for (double th : {-2.0, 0.0, 0.7, 3.0}) CHECK(score_value(wi, id, th) == Approx(swz - th * sw).margin(1e-12));
}

TEST_CASE("root solver: single record and closed forms", "[regression]") {
  const auto one = make({0.0}, {0.0}, {1.2345});
  for (const auto& cfg : {huber_cfg(), identity_cfg()}) {
    const auto fit = fit_survival(one);
    CHECK(solve_m_hat(build_score(one, fit, cfg, 0.0), cfg) == 1.2345);
    CHECK(classical_m_hat(one, fit, cfg, 0.0) == 1.2345);
  }

  // identical covariates give equal kernel weights
  const auto flat = make({0.5, 0.5, 0.5, 0.5}, {0, 0, 0, 0}, {1, 2, 4, 7});
  CHECK(classical_m_hat(flat, fit_survival(flat), identity_cfg(), 0.0) == Approx(3.5).epsilon(1e-15));
}

TEST_CASE("solver matches the closed form under the identity objective", "[regression][property]") {
  std::mt19937_64 rng(500);
  std::uniform_real_distribution<double> ux(-1.5, 1.5), uh(0.2, 1.5);
  for (int rep = 0; rep < 500; ++rep) {
    const auto s = oracle::random_sample(rng, 5 + rep % 56, 0.3);
    const auto fit = fit_survival(s);
    const auto cfg = identity_cfg(uh(rng));
    const double x = ux(rng);
    WeightedScore sc;
    try {
      sc = build_score(s, fit, cfg, x);
    } catch (const NoEffectiveData&) {
      continue;
    }
    REQUIRE(std::abs(solve_m_hat(sc, cfg) - classical_m_hat(s, fit, cfg, x)) < 1e-8);
  }
}

TEST_CASE("without truncation and censoring the estimators reduce to Nadaraya-Watson", "[regression][oracle]") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = untruncated(rng, 10 + rep);
    const auto fit = fit_survival(s);
    std::vector<double> x, z;
    for (const auto& o : s.observations()) {
      x.push_back(o.x[0]);
      z.push_back(o.z);
    }
    const auto cfg = identity_cfg(0.6);
    for (double x0 : {-1.0, 0.0, 0.5}) {
      const double nw = oracle::nadaraya_watson(x, z, 0.6, x0);
      CHECK(std::abs(classical_m_hat(s, fit, cfg, x0) - nw) <= 1e-10);
      CHECK(std::abs(solve_m_hat(build_score(s, fit, cfg, x0), cfg) - nw) <= 1e-8);
      CHECK(std::abs(carbonez_m_hat(s, fit, cfg, x0) - nw) <= 1e-10);
      CHECK(std::abs(adjusted_nw_m_hat(s, fit, cfg, x0) - nw) <= 1e-10);
    }
  }
}

TEST_CASE("comparator estimators on a hand sample", "[regression]") {
  const auto s = hand3();
  const auto fit = fit_survival(s);
  REQUIRE(fit.survival_g(1.0) == 1.0);
  REQUIRE(fit.survival_g(3.0) == Approx(0.5));
  REQUIRE(fit.l_n.eval(1.0) == 1.0);
  const auto cfg = identity_cfg(1.0);
  const double k5 = oracle::gauss(0.5), k0 = oracle::gauss(0.0);
  CHECK(carbonez_m_hat(s, fit, cfg, 0.5) == Approx(k5 * (1.0 + 3.0 / 0.5) / (2.0 * k5 + k0)).epsilon(1e-14));
  CHECK(classical_m_hat(s, fit, cfg, 0.5) == Approx(7.0 / 3.0).epsilon(1e-14));

  const auto one = make({0.0}, {0.0}, {2.5});
  CHECK(carbonez_m_hat(one, fit_survival(one), cfg, 0.0) == 2.5);
  const auto cens = make({0.0}, {0.0}, {2.5}, {0});
  CHECK_THROWS_AS(classical_m_hat(cens, fit_survival(cens), cfg, 0.0), NoEffectiveData);
}

TEST_CASE("score derivative", "[regression]") {
  std::mt19937_64 rng(13);
  const auto s = oracle::random_sample(rng, 40);
  const auto fit = fit_survival(s);

  const auto id = identity_cfg(0.8);
  const auto wi = build_score(s, fit, id, 0.1);
  double sw = 0;
  for (double w : wi.kept_w) sw += w;
  CHECK(estimate_score_derivative(wi, id, 0.3) == -sw);

  const auto hb = huber_cfg(0.8);
  const auto wh = build_score(s, fit, hb, 0.1);
  for (double th : {-1.0, 0.0, 0.4, 2.0}) {
    const double eps = 1e-5;
    const double fd = (score_value(wh, hb, th + eps) - score_value(wh, hb, th - eps)) / (2 * eps);
    CHECK(std::abs(estimate_score_derivative(wh, hb, th) - fd) < 1e-6);
  }

  const auto one = make({0.0}, {0.0}, {1.0});
  const auto w1 = build_score(one, fit_survival(one), hb, 0.0);
  CHECK(estimate_score_derivative(w1, hb, 1.0) == -w1.kept_w[0]);
}

TEST_CASE("plug-in Gamma", "[regression]") {
  const auto one = make({0.0}, {0.0}, {1.0});
  const auto hb = huber_cfg();
  CHECK(estimate_gamma(build_score(one, fit_survival(one), hb, 0.0), hb, 1.0) == 0.0);

  const auto s = hand3();
  const auto fit = fit_survival(s);
  REQUIRE(fit.mu_n == Approx(1.0).margin(1e-15));
  const auto psi = [](double u) { return u / std::sqrt(1 + u * u); };
  const double theta = 1.5, k5 = oracle::gauss(0.5);
  const double hand = (1.0 / 3.0) * (k5 * psi(1 - theta) * psi(1 - theta) / 1.0 +
                                     k5 * psi(3 - theta) * psi(3 - theta) / 0.25);
  CHECK(estimate_gamma(s, fit, hb, 0.5, theta) == Approx(hand).epsilon(1e-13));

  std::mt19937_64 rng(21);
  int used = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto r = oracle::random_sample(rng, 20);
    const auto f = fit_survival(r);
    // a lone record at the bottom of the risk set drives mu_n to 0
    if (f.mu_n == 0.0) continue;
    ++used;
    CHECK(estimate_gamma(r, f, hb, 0.0, 0.3 * rep - 5) >= 0.0);
  }
  CHECK(used >= 10);
}

TEST_CASE("plug-in sigma", "[regression]") {
  const auto one = make({0.0}, {0.0}, {1.0});
  const auto hb = huber_cfg();
  CHECK(estimate_sigma(one, fit_survival(one), hb, 0.0, 1.0) == 0.0);

  std::mt19937_64 rng(33);
  for (int rep = 0; rep < 100; ++rep) {
    const auto s = oracle::random_sample(rng, 30, 0.3);
    const auto fit = fit_survival(s);
    EstimatorConfig a = huber_cfg(0.9), b = a;
    b.psi = a.psi.scaled(3.7);
    WeightedScore sa, sb;
    try {
      sa = build_score(s, fit, a, 0.0);
      sb = build_score(s, fit, b, 0.0);
    } catch (const NoEffectiveData&) {
      continue;
    }
    const double ma = solve_m_hat(sa, a), mb = solve_m_hat(sb, b);
    CHECK(std::abs(ma - mb) <= 1e-12);
    const double ga = estimate_sigma(sa, a, ma), gb = estimate_sigma(sb, b, mb);
    CHECK(std::abs(ga - gb) <= 1e-12 * std::max(1.0, ga));
  }
}

TEST_CASE("confidence intervals", "[regression]") {
  CHECK(normal::quantile(0.975) == Approx(1.959964).margin(1e-6));
  const auto [lo0, hi0] = confidence_interval(1.0, 0.0, 0.05, 100, 0.5);
  CHECK(lo0 == 1.0);
  CHECK(hi0 == 1.0);
  const auto [lo, hi] = confidence_interval(1.0, 0.8, 0.05, 100, 0.5);
  CHECK(hi - lo == Approx(2 * normal::quantile(0.975) * 0.8 / std::sqrt(50.0)).epsilon(1e-15));
  CHECK_THROWS_AS(confidence_interval(1.0, 0.8, 1.0, 100, 0.5), InvalidConfig);

  std::mt19937_64 rng(2);
  const auto s = oracle::random_sample(rng, 80);
  const auto fit = fit_survival(s);
  const auto cfg = huber_cfg(0.5);
  const auto r = estimate_at(s, fit, cfg, 0.0, 0.05);
  CHECK(r.ci_lo <= r.m_hat);
  CHECK(r.m_hat <= r.ci_hi);
  CHECK(r.ci_hi - r.ci_lo == Approx(2 * normal::quantile(0.975) * r.sigma_hat / std::sqrt(80 * 0.5)));
  CHECK(r.n_effective > 0);
  const auto tight = estimate_at(s, fit, cfg, 0.0, 0.2);
  CHECK(tight.ci_hi - tight.ci_lo < r.ci_hi - r.ci_lo);

  const auto few = make({0, 0, 0}, {0, 0, 0}, {1, 2, 3});
  CHECK_THROWS_AS(estimate_at(few, fit_survival(few), cfg, 0.0, 0.05), NotEstimable);
}

TEST_CASE("normal quantile accuracy", "[regression][oracle]") {
  for (double p : {1e-10, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.999, 1 - 1e-9}) {
    const double q = normal::quantile(p);
    // invert with the complementary error function
    const double back = p < 0.5 ? 0.5 * std::erfc(-q / std::sqrt(2.0)) : 1.0 - 0.5 * std::erfc(q / std::sqrt(2.0));
    CHECK(std::abs(back - p) <= 1e-8 * std::max(1e-2, oracle::phi_pdf(q)));
  }
  CHECK(normal::quantile(0.5) == 0.0);
  CHECK(normal::quantile(0.0) == -HUGE_VAL);
  CHECK_THROWS_AS(normal::quantile(1.5), std::domain_error);
}

TEST_CASE("solver does not depend on the initial bracket", "[regression][property]") {
  std::mt19937_64 rng(55);
  for (int rep = 0; rep < 100; ++rep) {
    const auto s = oracle::random_sample(rng, 10 + rep % 30);
    const auto fit = fit_survival(s);
    std::vector<double> roots;
    for (double pad : {0.5, 1.0, 5.0}) {
      auto cfg = huber_cfg(0.7);
      cfg.bracket_pad = pad;
      try {
        roots.push_back(solve_m_hat(build_score(s, fit, cfg, 0.0), cfg));
      } catch (const NoEffectiveData&) {
      }
    }
    for (double r : roots) CHECK(std::abs(r - roots.front()) <= 1e-10);
  }
}

TEST_CASE("root shifts with the responses", "[regression][property]") {
  std::mt19937_64 rng(66);
  for (int rep = 0; rep < 100; ++rep) {
    const auto s = oracle::random_sample(rng, 25);
    const auto fit = fit_survival(s);
    const auto cfg = huber_cfg(0.6);
    WeightedScore sc;
    try {
      sc = build_score(s, fit, cfg, 0.0);
    } catch (const NoEffectiveData&) {
      continue;
    }
    const double base = solve_m_hat(sc, cfg);
    for (double c : {-3.0, 0.25, 10.0}) {
      WeightedScore moved = sc;
      for (auto& z : moved.kept_z) z += c;
      CHECK(std::abs(solve_m_hat(moved, cfg) - (base + c)) <= 2 * cfg.root_tol);
    }
  }
}

TEST_CASE("oracle score", "[regression]") {
  std::mt19937_64 rng(88);
  const auto s = untruncated(rng, 30);
  const auto fit = fit_survival(s);
  const auto cfg = huber_cfg(0.5);
  const auto sc = build_score(s, fit, cfg, 0.0);
  const auto one_fn = [](double) { return 1.0; };
  for (double th : {-1.0, 0.0, 1.0})
    CHECK(oracle_score(s, 1.0, one_fn, one_fn, cfg, 0.0, th) == Approx(score_value(sc, cfg, th)).epsilon(1e-12));

  const auto one = make({0.0}, {-1.0}, {0.8});
  const auto half = [](double) { return 0.5; };
  CHECK(oracle_score(one, 0.3, half, half, cfg, 0.0, 0.8) == 0.0);
}

TEST_CASE("cross-validation criterion", "[regression][lscv]") {
  std::mt19937_64 rng(101);
  const auto s = untruncated(rng, 40);
  const auto fit = fit_survival(s);
  auto cfg = identity_cfg();
  const std::vector<double> single = {0.37};
  CHECK(lscv_bandwidth(s, fit, cfg, single) == 0.37);
  CHECK_THROWS_AS(lscv_bandwidth(s, fit, cfg, std::vector<double>{}), InvalidConfig);

  // leave-one-out Nadaraya-Watson by brute force
  std::vector<double> x, z;
  for (const auto& o : s.observations()) {
    x.push_back(o.x[0]);
    z.push_back(o.z);
  }
  for (double h : {0.2, 0.5, 1.0}) {
    double cv = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::vector<double> xr = x, zr = z;
      xr.erase(xr.begin() + i);
      zr.erase(zr.begin() + i);
      const double r = z[i] - oracle::nadaraya_watson(xr, zr, h, x[i]);
      cv += r * r;
    }
    cfg.bandwidth = h;
    CHECK(lscv_criterion(s, fit, cfg) == Approx(cv).epsilon(1e-9));
  }

  // ties go to the smaller bandwidth
  const std::vector<double> dup = {0.5, 0.5, 0.3, 0.3};
  CHECK(lscv_bandwidth(s, fit, cfg, dup) == 0.3);
}

TEST_CASE("cross-validation reduces to nearest-neighbour residuals for tiny h", "[regression][lscv]") {
  // Gaps 1, 2, 4: with h = 0.15 the second neighbour's kernel weight is below
  // 1e-28 of the first, so each left-out fit is the nearest neighbour's Z.
  std::vector<LtrcObservation> obs;
  for (double x : {0.0, 1.0, 3.0, 7.0}) obs.push_back({{x}, 2 * x, -100.0, 1});
  const auto s = validate_sample(obs);
  const auto fit = fit_survival(s);
  auto cfg = identity_cfg();
  cfg.bandwidth = 0.15;
  CHECK(lscv_criterion(s, fit, cfg) == Approx(2 * 2 + 2 * 2 + 4 * 4 + 8 * 8).epsilon(1e-9));
}

TEST_CASE("cross-validated bandwidth in the simulation design", "[regression][lscv][design]") {
  SimConfig sim;
  sim.n = 100;
  const auto [a0, u0] = calibrate_rates(0.2, 0.2, sim);
  sim.a0 = a0;
  sim.u0 = u0;
  std::vector<double> picked;
  const auto grid = std::vector<double>{0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.13, 1.25, 1.5, 2.0, 2.5, 3.0};
  for (std::uint64_t b = 0; b < 20; ++b) {
    sim.seed = derive_seed(1, b);
    const auto s = gen_ltrc_sample(sim).first;
    picked.push_back(lscv_bandwidth(s, fit_survival(s), huber_cfg(), grid));
  }
  std::sort(picked.begin(), picked.end());
  const double median = 0.5 * (picked[9] + picked[10]);
  INFO("median selected bandwidth " << median);
  CHECK(median >= 0.5);
  CHECK(median <= 2.5);
}
