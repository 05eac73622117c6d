#include <cmath>
#include <random>

#include "doctest.h"
#include "gsci/compatible.hpp"
#include "gsci/informative.hpp"
#include "support.hpp"

using namespace gsci;
using namespace testing;

namespace {

constexpr double kAlpha = 0.025;

// Largest root of phi_cdf(x - est) = q^(x v 0) alpha by a dense scan and bisection.
double scan_root(double est, double q, double alpha) {
  auto f = [&](double x) { return phi_cdf(x - est) - std::pow(q, std::max(x, 0.0)) * alpha; };
  double a = est - 12.0;
  const double h = 1e-3;
  while (f(a + h) <= 0.0) a += h;
  double b = a + h;
  for (int i = 0; i < 200; ++i) {
    const double c = 0.5 * (a + b);
    (f(c) <= 0.0 ? a : b) = c;
  }
  return a;
}

ValidatedGraph single() {
  GraphSpec spec;
  spec.initial_weights = {1.0};
  spec.transition = SquareMatrix(1);
  return validate_graph(spec);
}

const std::vector<int> kFirst1{0};
const std::vector<int> kFirst2{0, 0};

}  // namespace

TEST_CASE("complete pair limit solves the one dimensional equation") {
  const auto g = validate_graph(complete_pair(1.0));
  for (double q : {0.3, 0.5, 0.9}) {
    for (double est : {1.0, 3.0, 5.0}) {
      PValueFamily p(curves(2, 1), {{{est, 1.0}}, {{-3.0, 1.0}}});
      IterationConfig cfg;
      cfg.q = q;
      const auto b = primary_algorithm(g, p, kFirst2, PKind::Repeated, kAlpha, cfg);
      REQUIRE(b.converged);
      CHECK(b.lower[1] < 0.0);
      CHECK(b.lower[0] == doctest::Approx(scan_root(est, q, kAlpha)).epsilon(1e-6));
    }
  }
}

TEST_CASE("single hypothesis gives the repeated confidence bound") {
  const auto g = single();
  PValueFamily p(curves(1, 1), {{{3.0, 1.0}}});
  const auto b = primary_algorithm(g, p, kFirst1, PKind::Repeated, kAlpha, {});
  CHECK(b.converged);
  CHECK(b.lower[0] == doctest::Approx(3.0 - 1.959963984540054).epsilon(1e-7));
}

TEST_CASE("deep null data reproduce the compatible bounds") {
  const auto g = validate_graph(three_node_general());
  const double est = -1.2815515655446004;  // p(0) = 0.9
  PValueFamily p(curves(3, 2), {{{0.3, 1.0}, {est, 1.0}}, {{0.1, 1.0}, {est, 1.0}}, {{0.0, 1.0}, {est, 1.0}}});
  const std::vector<int> stages{1, 1, 1};
  const auto b = primary_algorithm(g, p, stages, PKind::Repeated, kAlpha, {});
  const auto c = compatible_bounds(g, IndexSet{}, stages, p, PKind::Repeated, kAlpha);
  CHECK(b.converged);
  CHECK(b.lower[0] == doctest::Approx(c[0]).epsilon(1e-8));
  CHECK(b.lower[1] == doctest::Approx(c[1]).epsilon(1e-8));
  CHECK(b.lower[2] == kMinusInf);
  CHECK(c[2] == kMinusInf);
  CHECK(b.lower[0] < 0.0);
}

TEST_CASE("start vectors") {
  const auto g = validate_graph(hierarchical(3));
  PValueFamily p(curves(3, 1), {{{3.0, 1.0}}, {{2.0, 1.0}}, {{0.5, 1.0}}});
  const double d0 = IterationConfig{}.delta(kAlpha, 0);
  const auto s = default_start_vectors(g, p, std::vector<int>{0, 0, 0}, PKind::Repeated, kAlpha, d0);
  CHECK(s.lower[0] == std::min(0.0, p.inverse(0, 0, PKind::Repeated, kAlpha)));
  CHECK(s.lower[1] == kMinusInf);
  CHECK(s.lower[2] == kMinusInf);
  CHECK(valid_lower_start(g, p, std::vector<int>{0, 0, 0}, PKind::Repeated, kAlpha, 0.5, s.lower));
  CHECK(valid_upper_start(g, p, std::vector<int>{0, 0, 0}, PKind::Repeated, kAlpha + d0, 0.5, s.upper));

  const std::vector<double> bad{2.9, 0.0, 0.0};
  CHECK_FALSE(valid_lower_start(g, p, std::vector<int>{0, 0, 0}, PKind::Repeated, kAlpha, 0.5, bad));
  StartVectors given{bad, s.upper};
  const auto b = primary_algorithm(g, p, std::vector<int>{0, 0, 0}, PKind::Repeated, kAlpha, {}, &given);
  CHECK(b.start_replaced);
  const auto d = primary_algorithm(g, p, std::vector<int>{0, 0, 0}, PKind::Repeated, kAlpha, {});
  CHECK_FALSE(d.start_replaced);
  for (int j = 0; j < 3; ++j) CHECK(b.lower[j] == d.lower[j]);
}

TEST_CASE("configuration checks") {
  IterationConfig cfg;
  cfg.q = 1.0;
  CHECK_THROWS_AS(validate_config(cfg, kAlpha), Error);
  cfg.q = 0.5;
  cfg.delta0 = 0.99;
  CHECK_THROWS_AS(validate_config(cfg, kAlpha), Error);
  cfg.delta0 = 0.0;
  CHECK(cfg.delta(kAlpha, 0) == 0.1);
  CHECK(cfg.delta(kAlpha, 3) == 0.0125);
  CHECK(IterationConfig{}.delta(0.95, 0) == doctest::Approx(0.045));
}

TEST_CASE("gap ignores components at minus infinity in both vectors") {
  const std::vector<double> a{0.0, kMinusInf, 1.0};
  const std::vector<double> b{3.0, kMinusInf, 5.0};
  CHECK(bracket_gap(a, b) == doctest::Approx(5.0));
  const std::vector<double> c{3.0, 0.0, 5.0};
  CHECK(bracket_gap(a, c) == kPlusInf);
}

TEST_CASE("bracketing on random trials") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  IterationConfig cfg;
  cfg.keep_trace = true;
  for (int rep = 0; rep < 40; ++rep) {
    const int m = 2 + rep % 3;
    const auto g = validate_graph(random_graph(rng, m));
    std::vector<double> theta(m);
    for (double& t : theta) t = 4.0 * u(rng) - 1.0;
    PValueFamily p(curves(m, 2), simulate_estimates(rng, theta, 2));
    const std::vector<int> stages(m, 1);
    for (auto kind : {PKind::Repeated, PKind::Sequential}) {
      const auto b = primary_algorithm(g, p, stages, kind, kAlpha, cfg);
      CHECK(b.converged);
      for (std::size_t l = 0; l < b.lower_trace.size(); ++l) {
        for (int j = 0; j < m; ++j) {
          CHECK(b.lower_trace[l][j] <= b.upper_trace[l][j]);
          if (l) {
            CHECK(b.lower_trace[l][j] >= b.lower_trace[l - 1][j]);
            CHECK(b.upper_trace[l][j] <= b.upper_trace[l - 1][j]);
          }
        }
      }
      for (double r : limit_residuals(g, p, stages, kind, kAlpha, cfg.q, b.lower)) CHECK(r < 1e-6);

      // a different valid lower start converges to the same limit
      StartVectors from_below{std::vector<double>(m, kMinusInf), b.upper_trace.front()};
      const auto c = primary_algorithm(g, p, stages, kind, kAlpha, {}, &from_below);
      CHECK_FALSE(c.start_replaced);
      for (int j = 0; j < m; ++j) {
        if (b.lower[j] == kMinusInf) {
          CHECK(c.lower[j] == kMinusInf);
        } else {
          CHECK(std::abs(c.lower[j] - b.lower[j]) <= 2 * cfg.epsilon);
        }
      }
    }
  }
}

TEST_CASE("larger evidence strictly raises finite bounds") {
  std::mt19937_64 rng(23);
  const auto g = validate_graph(hierarchical(3));
  for (int rep = 0; rep < 30; ++rep) {
    PValueFamily p(curves(3, 2), simulate_estimates(rng, {2.5, 1.5, 0.5}, 2));
    const std::vector<int> stages{1, 1, 1};
    const auto base = primary_algorithm(g, p, stages, PKind::Repeated, kAlpha, {});
    for (int j = 0; j < 3; ++j) {
      if (base.lower[j] == kMinusInf) continue;
      PValueFamily shifted = p;
      shifted.set_estimate(j, 1, p.data(j, 1).estimate + 0.5 * p.data(j, 1).std_error);
      const auto b = primary_algorithm(g, shifted, stages, PKind::Repeated, kAlpha, {});
      CHECK(b.lower[j] > base.lower[j]);
    }
  }
}

TEST_CASE("stagewise procedure") {
  std::mt19937_64 rng(29);
  const auto g = validate_graph(hierarchical(3));
  IterationConfig cfg;
  for (int rep = 0; rep < 20; ++rep) {
    PValueFamily p(curves(3, 3), simulate_estimates(rng, {2.0, 1.5, 1.0}, 3));
    IsciStage s, r;
    std::vector<int> r_stages(3, -1);
    IndexSet r_stopped;
    for (int k = 0; k < 3; ++k) {
      const std::vector<int> all(3, k);
      const IsciStage prev_s = s;
      s = isci_stage(g, p, all, PKind::Sequential, kAlpha, cfg, k ? &prev_s : nullptr);
      for (int j = 0; j < 3; ++j) {
        if (k) CHECK(s.bracket.lower[j] >= prev_s.bracket.lower[j]);
      }
      for (int j = 0; j < 3; ++j)
        if (!r_stopped.contains(j)) r_stages[j] = k;
      const IsciStage prev_r = r;
      r = isci_stage(g, p, r_stages, PKind::Repeated, kAlpha, cfg, k ? &prev_r : nullptr);
      if (k) CHECK(prev_r.rejected.subset_of(r.rejected));
      r_stopped = r_stopped | r.rejected;
    }
  }
}

TEST_CASE("efficient adjustment of informative bounds") {
  SUBCASE("single hypothesis equals the repeated limit") {
    const auto g = single();
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 10; ++rep) {
      PValueFamily p(curves(1, 2), simulate_estimates(rng, {1.0 + 0.3 * rep}, 2));
      const std::vector<int> last{1};
      const auto ls = primary_algorithm(g, p, last, PKind::Sequential, kAlpha, {});
      const auto lr = primary_algorithm(g, p, last, PKind::Repeated, kAlpha, {});
      const auto c = isci_efficient_adjustment(g, ls.lower, p, last, 0.5, kAlpha);
      CHECK(c.lower[0] == doctest::Approx(lr.lower[0]).epsilon(1e-6));
    }
  }
  SUBCASE("bounded by the sequential bounds") {
    std::mt19937_64 rng(37);
    for (int rep = 0; rep < 20; ++rep) {
      const auto g = validate_graph(rep % 2 ? three_node_general() : hierarchical(3));
      PValueFamily p(curves(3, 2), simulate_estimates(rng, {2.5, 2.0, 1.0}, 2));
      const std::vector<int> last{1, 1, 1};
      const auto ls = primary_algorithm(g, p, last, PKind::Sequential, kAlpha, {});
      const auto c = isci_efficient_adjustment(g, ls.lower, p, last, 0.5, kAlpha);
      for (int j = 0; j < 3; ++j) {
        CHECK(c.lower[j] <= ls.lower[j]);
        CHECK((c.lower[j] >= 0.0) == c.rejected.contains(j));
      }
    }
  }
  SUBCASE("blocked gatekeeper") {
    const auto g = validate_graph(hierarchical(2));
    PValueFamily p(curves(2, 1), {{{-2.0, 1.0}}, {{4.0, 1.0}}});
    const auto ls = primary_algorithm(g, p, kFirst2, PKind::Sequential, kAlpha, {});
    CHECK(ls.lower[0] < 0.0);
    const auto c = isci_efficient_adjustment(g, ls.lower, p, kFirst2, 0.5, kAlpha);
    CHECK(c.lower[1] == kMinusInf);
    CHECK(c.lower[0] == doctest::Approx(ls.lower[0]).epsilon(1e-8));
  }
}
