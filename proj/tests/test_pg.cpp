#include <doctest.h>

#include <cmath>
#include <vector>

#include "rng.hpp"
#include "selftest.hpp"
#include "support/oracles.hpp"

using sshrimp::random::RngStream;
namespace rnd = sshrimp::random;

namespace {
double pg_mean(double c) {
  return c == 0.0 ? 0.25 : std::tanh(c / 2.0) / (2.0 * c);
}
}  // namespace

TEST_SUITE_BEGIN("polya_gamma");

TEST_CASE("PG(1,0) sample mean hits 1/4") {
  RngStream rng(101);
  std::vector<double> draws(100000);
  for (auto& d : draws) {
    d = rnd::sample_pg(rng, {1.0, 0.0});
    CHECK(d > 0.0);
  }
  CHECK(std::fabs(oracles::mean(draws) - 0.25) <
        3.0 * oracles::se_of_mean(draws));
}

TEST_CASE("PG(1,2) sample mean hits tanh(1)/4") {
  RngStream rng(103);
  std::vector<double> draws(100000);
  for (auto& d : draws) d = rnd::sample_pg(rng, {1.0, 2.0});
  CHECK(std::fabs(oracles::mean(draws) - pg_mean(2.0)) <
        3.0 * oracles::se_of_mean(draws));
}

TEST_CASE("tilt enters only through c^2: PG(1,1.7) == PG(1,-1.7) in law") {
  RngStream rng(107);
  std::vector<double> pos(10000);
  std::vector<double> neg(10000);
  for (auto& d : pos) d = rnd::sample_pg(rng, {1.0, 1.7});
  for (auto& d : neg) d = rnd::sample_pg(rng, {1.0, -1.7});
  const double d = sshrimp::selftest::ks_statistic(std::move(pos), std::move(neg));
  CHECK(d < sshrimp::selftest::ks_critical(0.01, 10000, 10000));
}

TEST_CASE("KS against the series oracle also at c=4 (large-tilt branch)") {
  RngStream rng(113);
  std::vector<double> a(10000);
  std::vector<double> b(10000);
  for (auto& d : a) d = rnd::sample_pg(rng, {1.0, 4.0});
  for (auto& d : b) d = rnd::pg_series_oracle(rng, {1.0, 4.0}, 500);
  const double d = sshrimp::selftest::ks_statistic(std::move(a), std::move(b));
  CHECK(d < sshrimp::selftest::ks_critical(0.001, 10000, 10000));
}

TEST_CASE("general shape b rejected by the exact sampler") {
  RngStream rng(1);
  CHECK_THROWS_AS(rnd::sample_pg(rng, {2.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(rnd::sample_pg(rng, {1.0, std::nan("")}),
                  std::invalid_argument);
}

TEST_CASE("pg self-test suite (quick tier) passes") {
  sshrimp::selftest::Options opt;
  opt.quick = true;
  const auto report = sshrimp::selftest::pg_suite(opt);
  INFO(report.text());
  CHECK(report.passed());
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("pg_series_oracle");

TEST_CASE("single-term series with g1 = 1, c = 0 evaluates to 2/pi^2") {
  const double g[] = {1.0};
  CHECK(rnd::pg_series_value({g, 1}, 0.0) ==
        doctest::Approx(0.202642367).epsilon(1e-9));
}

TEST_CASE("truncation 200, c=0: mean within 1% of 1/4") {
  RngStream rng(127);
  std::vector<double> draws(100000);
  for (auto& d : draws) d = rnd::pg_series_oracle(rng, {1.0, 0.0}, 200);
  CHECK(oracles::mean(draws) == doctest::Approx(0.25).epsilon(0.01));
}

TEST_CASE("truncation 200, c=3: mean within 2% of tanh(1.5)/6") {
  RngStream rng(131);
  std::vector<double> draws(100000);
  for (auto& d : draws) d = rnd::pg_series_oracle(rng, {1.0, 3.0}, 200);
  CHECK(oracles::mean(draws) == doctest::Approx(pg_mean(3.0)).epsilon(0.02));
}

TEST_CASE("oracle validates parameters") {
  RngStream rng(1);
  CHECK_THROWS_AS(rnd::pg_series_oracle(rng, {0.0, 0.0}, 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(rnd::pg_series_oracle(rng, {1.0, 0.0}, 0),
                  std::invalid_argument);
}

TEST_SUITE_END();
