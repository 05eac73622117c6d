#include <cmath>
#include <random>

#include "doctest.h"
#include "gsci/estimators.hpp"
#include "support.hpp"

using namespace gsci;
using namespace testing;

namespace {

double scan_root(double est, double q, double alpha) {
  auto f = [&](double x) { return phi_cdf(x - est) - std::pow(q, std::max(x, 0.0)) * alpha; };
  double a = est - 12.0;
  while (f(a + 1e-3) <= 0.0) a += 1e-3;
  double b = a + 1e-3;
  for (int i = 0; i < 200; ++i) {
    const double c = 0.5 * (a + b);
    (f(c) <= 0.0 ? a : b) = c;
  }
  return a;
}

}  // namespace

TEST_CASE("hierarchical starting levels are scaled to one half") {
  const auto g = validate_graph(hierarchical(4));
  PValueFamily p(curves(4, 1), {{{-1.0, 1.0}}, {{0.0, 1.0}}, {{0.0, 1.0}}, {{0.0, 1.0}}});
  const auto r = median_estimates(EstimatorVariant::A, PKind::Repeated, g, p, {{0, 0, 0, 0}}, {});
  // H1 is not rejected at level 0.5, so only it carries level
  CHECK(r.estimates[0] == doctest::Approx(p.inverse(0, 0, PKind::Repeated, 0.5)));
  CHECK(r.estimates[0] == doctest::Approx(-1.0).epsilon(1e-9));
  for (int j = 1; j < 4; ++j) CHECK(r.estimates[j] == kMinusInf);
}

TEST_CASE("compatible estimates stick at zero after a rejection") {
  const auto g = validate_graph(hierarchical(3));
  PValueFamily p(curves(3, 1), {{{1.0, 1.0}}, {{-2.0, 1.0}}, {{0.5, 1.0}}});
  const auto a = median_estimates(EstimatorVariant::A, PKind::Repeated, g, p, {{0, 0, 0}}, {});
  CHECK(a.estimates[0] == 0.0);
  CHECK(a.stuck_at_zero[0]);
  CHECK(a.estimates[1] == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(a.estimates[2] == kMinusInf);
  const auto b = median_estimates(EstimatorVariant::B, PKind::Sequential, g, p, {{0, 0, 0}}, {});
  CHECK(b.estimates[0] == 0.0);
  CHECK(b.stuck_at_zero[0]);
}

TEST_CASE("informative estimate on the complete pair") {
  const auto g = validate_graph(complete_pair(1.0));
  for (double est : {0.0, 0.8, 2.0}) {
    PValueFamily p(curves(2, 1), {{{est, 1.0}}, {{-3.0, 1.0}}});
    const auto c = median_estimates(EstimatorVariant::C, PKind::Repeated, g, p, {{0, 0}}, {});
    CHECK(c.estimates[0] == doctest::Approx(scan_root(est, 0.5, 0.5)).epsilon(1e-6));
    CHECK(c.estimates[0] <= est);
  }
}

TEST_CASE("sequential informative estimates do not decrease over stages") {
  std::mt19937_64 rng(41);
  const auto g = validate_graph(hierarchical(3));
  for (int rep = 0; rep < 15; ++rep) {
    PValueFamily p(curves(3, 3), simulate_estimates(rng, {0.5, 0.3, 0.0}, 3));
    std::vector<std::vector<int>> schedule;
    std::vector<double> prev(3, kMinusInf);
    for (int k = 0; k < 3; ++k) {
      schedule.push_back(std::vector<int>(3, k));
      const auto c = median_estimates(EstimatorVariant::C, PKind::Sequential, g, p, schedule, {});
      const auto d = median_estimates(EstimatorVariant::D, PKind::Sequential, g, p, schedule, {});
      for (int j = 0; j < 3; ++j) {
        CHECK(c.estimates[j] >= prev[j]);
        CHECK(d.estimates[j] <= c.estimates[j]);
      }
      prev = c.estimates;
    }
  }
}

TEST_CASE("estimator errors") {
  const auto g = validate_graph(hierarchical(2));
  PValueFamily p(curves(2, 1), {{{0.0, 1.0}}, {{0.0, 1.0}}});
  CHECK_THROWS_AS(median_estimates(EstimatorVariant::A, PKind::Repeated, g, p, {}, {}), Error);
  CHECK(std::string(to_string(EstimatorVariant::D)) == "d");
}
