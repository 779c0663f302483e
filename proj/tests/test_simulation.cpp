#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "ltrc/io.hpp"
#include "ltrc/random.hpp"
#include "ltrc/simulation.hpp"
#include "support/oracles.hpp"

using namespace ltrc;
using Catch::Approx;

namespace {

double variance(const std::vector<double>& v) {
  double m = 0;
  for (double a : v) m += a;
  m /= v.size();
  double s = 0;
  for (double a : v) s += (a - m) * (a - m);
  return s / (v.size() - 1);
}

}  // namespace

TEST_CASE("seed derivation", "[simulation][random]") {
  CHECK(derive_seed(1, "noise") == derive_seed(1, "noise"));
  CHECK(derive_seed(1, "noise") != derive_seed(1, "censoring"));
  CHECK(derive_seed(1, "noise") != derive_seed(2, "noise"));
  CHECK(derive_seed(5, std::uint64_t{0}) != derive_seed(5, std::uint64_t{1}));
  RandomStream a(3, "x"), b(3, "x");
  for (int k = 0; k < 10; ++k) CHECK(a.normal() == b.normal());
}

TEST_CASE("independent covariates when rho is zero", "[simulation]") {
  SimConfig c;
  c.rho = 0.0;
  const auto draws = gen_latent_stream(c, 100000);
  std::vector<double> x;
  for (const auto& d : draws) x.push_back(d.x);
  // SE of a normal sample variance: sigma^2 sqrt(2/(n-1))
  const double se = 0.25 * std::sqrt(2.0 / (x.size() - 1));
  CHECK(std::abs(variance(x) - 0.25) <= 3 * se);
}

TEST_CASE("autoregressive covariates reach the stationary variance", "[simulation]") {
  SimConfig c;
  CHECK(c.stationary_x_variance() == Approx(1.31579).margin(1e-5));
  const auto draws = gen_latent_stream(c, 1000000);
  std::vector<double> x;
  for (const auto& d : draws) x.push_back(d.x);
  CHECK(std::abs(variance(x) / c.stationary_x_variance() - 1.0) <= 0.05);
}

TEST_CASE("latent components have the configured laws", "[simulation]") {
  SimConfig c;
  c.rho = 0.0;
  c.a0 = 0.5;
  c.u0 = 1.0;
  const auto d = gen_latent_stream(c, 200000);
  std::vector<double> w, t, e;
  for (const auto& a : d) {
    w.push_back(a.w);
    t.push_back(a.t);
    e.push_back(a.y - c.m(a.x));
  }
  double mw = 0, mt = 0;
  for (double v : w) mw += v;
  for (double v : t) mt += v;
  mw /= w.size();
  mt /= t.size();
  CHECK(mw == Approx(2.0).margin(4 * 2.0 / std::sqrt(200000.0)));
  CHECK(mt == Approx(1.0).margin(4 * std::sqrt(2.0 / 200000.0)));
  CHECK(variance(t) == Approx(2.0).margin(0.03));
  CHECK(variance(e) == Approx(0.01).margin(0.0003));
}

TEST_CASE("generation is deterministic in the seed", "[simulation]") {
  SimConfig c;
  c.n = 200;
  const auto a = gen_ltrc_sample(c), b = gen_ltrc_sample(c);
  REQUIRE(a.first.n() == b.first.n());
  for (std::size_t i = 0; i < a.first.n(); ++i) {
    CHECK(a.first[i].x == b.first[i].x);
    CHECK(a.first[i].z == b.first[i].z);
    CHECK(a.first[i].t == b.first[i].t);
  }
  c.seed = 2;
  const auto d = gen_latent_stream(c, 1), e = gen_latent_stream(SimConfig(), 1);
  CHECK(d[0].x != e[0].x);
}

TEST_CASE("generated records follow the acceptance rule", "[simulation][property]") {
  SimConfig c;
  c.n = 500;
  c.a0 = 0.3;
  c.u0 = -1.0;
  const auto [s, stats] = gen_ltrc_sample(c);
  CHECK(s.n() == 500);
  CHECK(stats.n_drawn >= 500);
  CHECK(stats.tr_realized == Approx(1.0 - 500.0 / stats.n_drawn));

  // replay the latent stream and check each accepted record
  const auto latent = gen_latent_stream(c, stats.n_drawn);
  std::size_t k = 0, censored = 0;
  for (const auto& d : latent) {
    if (d.t > std::min(d.y, d.w)) continue;
    const auto& o = s[k++];
    REQUIRE(o.t <= o.z);
    REQUIRE(o.x[0] == d.x);
    REQUIRE(o.z == std::min(d.y, d.w));
    REQUIRE((o.delta == 1) == (o.z == d.y));
    censored += o.delta == 0;
  }
  CHECK(k == 500);
  CHECK(stats.cr_realized == Approx(censored / 500.0));
}

TEST_CASE("rate extremes", "[simulation]") {
  SimConfig c;
  c.n = 2000;
  c.u0 = -50.0;
  CHECK(gen_ltrc_sample(c).second.tr_realized < 0.001);
  c.a0 = 1e-6;
  CHECK(gen_ltrc_sample(c).second.cr_realized < 0.001);

  SimConfig bad;
  bad.n = 3;
  bad.u0 = 1e6;
  CHECK_THROWS_AS(gen_ltrc_sample(bad), AcceptanceTooLow);
}

TEST_CASE("configuration round trip and validation", "[simulation]") {
  SimConfig c;
  c.rho = 0.5;
  c.a0 = 0.123456789;
  c.seed = 987654321987654321ULL;
  const auto kv = KeyValueConfig::parse_string(c.serialize());
  const auto back = SimConfig::from_kv(kv);
  CHECK(back.serialize() == c.serialize());
  CHECK(back.a0 == c.a0);
  CHECK(back.seed == c.seed);

  SimConfig bad;
  bad.rho = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  bad.rho = 0.5;
  bad.sigma_noise = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  CHECK_THROWS_AS(SimConfig::from_kv(KeyValueConfig::parse_string("a0 = -1\n")), InvalidConfig);
  CHECK_THROWS_AS(KeyValueConfig::parse_string("novalue\n"), InvalidConfig);
  const auto parsed = KeyValueConfig::parse_string("# comment\n n = 40  # trailing\n\nrho=0.2\n");
  CHECK(SimConfig::from_kv(parsed).n == 40);
  CHECK(SimConfig::from_kv(parsed).rho == 0.2);
}

TEST_CASE("realized rates agree with numerical integration", "[simulation][oracle]") {
  SimConfig c;
  c.stationary_start = true;
  c.n = 10000;
  const auto [a0, u0] = calibrate_rates(0.2, 0.2, c);
  c.a0 = a0;
  c.u0 = u0;
  const oracle::ModelTruth truth(c);
  const double cr = truth.censoring_rate(), tr = truth.truncation_rate();
  INFO("integrated CR " << cr << " TR " << tr);
  CHECK(std::abs(cr - 0.2) <= 0.03);
  CHECK(std::abs(tr - 0.2) <= 0.03);
  const auto stats = gen_ltrc_sample(c).second;
  CHECK(std::abs(stats.cr_realized - 0.2) <= 0.03);
  CHECK(std::abs(stats.tr_realized - 0.2) <= 0.03);

  // CR within 3 binomial SE of its integrated value
  const double se = std::sqrt(cr * (1 - cr) / c.n);
  CHECK(std::abs(stats.cr_realized - cr) <= 3 * se + 0.005);
}

TEST_CASE("calibration", "[simulation]") {
  SimConfig c;
  const auto zero_cr = calibrate_rates_detailed(0.0, 0.2, c);
  CHECK(zero_cr.a0 == 1e-4);
  CHECK(zero_cr.cr_pilot < 0.01);
  const auto zero_tr = calibrate_rates_detailed(0.2, 0.0, c);
  CHECK(zero_tr.u0 == -50.0);
  CHECK(zero_tr.tr_pilot < 0.01);
  const auto both = calibrate_rates_detailed(0.2, 0.2, c);
  CHECK(std::abs(both.cr_pilot - 0.2) <= 0.02);
  CHECK(std::abs(both.tr_pilot - 0.2) <= 0.02);
  CHECK(both.passes >= 2);

  // verify on a fresh pilot with different randomness
  SimConfig check = c;
  check.seed = 4242;
  const RatePilot pilot(check, 100000);
  const auto r = pilot.rates(both.a0, both.u0);
  CHECK(std::abs(r.cr - 0.2) <= 0.02);
  CHECK(std::abs(r.tr - 0.2) <= 0.02);

  CHECK_THROWS_AS(calibrate_rates(0.95, 0.2, c), InvalidConfig);
}

TEST_CASE("generated samples survive the CSV format", "[simulation][io]") {
  SimConfig c;
  c.n = 100;
  const auto s = gen_ltrc_sample(c).first;
  std::stringstream buf;
  io::write_sample_csv(buf, s);
  const auto back = io::read_sample_csv(buf);
  for (std::size_t i = 0; i < s.n(); ++i) {
    REQUIRE(back[i].z == s[i].z);
    REQUIRE(back[i].t == s[i].t);
    REQUIRE(back[i].x == s[i].x);
  }
}
