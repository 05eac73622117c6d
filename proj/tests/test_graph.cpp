#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gsci/graph.hpp"

using namespace gsci;

namespace {

GraphSpec hierarchical(int m) {
  GraphSpec s;
  s.initial_weights.assign(m, 0.0);
  s.initial_weights[0] = 1.0;
  s.transition = SquareMatrix(m);
  for (int i = 0; i + 1 < m; ++i) s.transition(i, i + 1) = 1.0;
  return s;
}

GraphSpec random_graph(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GraphSpec s;
  s.initial_weights.resize(m);
  for (double& w : s.initial_weights) w = u(rng) < 0.3 ? 0.0 : u(rng);
  double sum = std::accumulate(s.initial_weights.begin(), s.initial_weights.end(), 0.0);
  if (sum == 0.0) {
    s.initial_weights[0] = 1.0;
    sum = 1.0;
  }
  for (double& w : s.initial_weights) w /= sum;
  s.transition = SquareMatrix(m);
  for (int i = 0; i < m; ++i) {
    double row = 0.0;
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      s.transition(i, j) = u(rng) < 0.3 ? 0.0 : u(rng);
      row += s.transition(i, j);
    }
    const double target = u(rng) < 0.3 ? u(rng) : 1.0;
    for (int j = 0; j < m; ++j) {
      if (row > 0.0) s.transition(i, j) *= target / row;
    }
  }
  return s;
}

// Update rule applied by hand on dense vectors, used as an independent check.
std::vector<double> oracle_levels(const GraphSpec& s, const std::vector<int>& order) {
  const int m = s.size();
  std::vector<double> w = s.initial_weights;
  std::vector<std::vector<double>> g(m, std::vector<double>(m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) g[i][j] = s.transition(i, j);
  std::vector<bool> active(m, true);
  for (int j : order) {
    active[j] = false;
    for (int l = 0; l < m; ++l)
      if (active[l]) w[l] += w[j] * g[j][l];
    w[j] = 0.0;
    auto h = g;
    for (int l = 0; l < m; ++l) {
      for (int i = 0; i < m; ++i) {
        if (!active[l] || !active[i] || l == i || g[l][j] * g[j][l] >= 1.0) {
          h[l][i] = 0.0;
          continue;
        }
        h[l][i] = (g[l][i] + g[l][j] * g[j][i]) / (1.0 - g[l][j] * g[j][l]);
      }
    }
    g = h;
  }
  return w;
}

}  // namespace

TEST_CASE("validation") {
  CHECK_NOTHROW(validate_graph(hierarchical(4)));

  GraphSpec bad;
  bad.initial_weights = {0.6, 0.6};
  bad.transition = SquareMatrix(2);
  try {
    validate_graph(bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::WeightSumExceeded);
  }

  GraphSpec single;
  single.initial_weights = {1.0};
  single.transition = SquareMatrix(1);
  CHECK(validate_graph(single).size() == 1);

  GraphSpec rows = hierarchical(3);
  rows.transition(0, 2) = 0.5;
  CHECK_THROWS_AS(validate_graph(rows), Error);

  GraphSpec neg = hierarchical(2);
  neg.transition(1, 0) = -0.1;
  try {
    validate_graph(neg);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NegativeWeight);
  }

  GraphSpec dims = hierarchical(3);
  dims.transition = SquareMatrix(2);
  try {
    validate_graph(dims);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimensionMismatch);
  }
}

TEST_CASE("update after rejection") {
  auto g = validate_graph(hierarchical(2));
  auto s = update_after_rejection(g.initial_state(), 0);
  CHECK(s.active == IndexSet::of({1}));
  CHECK(s.weights[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(update_after_rejection(s, 0), Error);

  auto h = validate_graph(hierarchical(4));
  auto s4 = state_after_rejecting(h, IndexSet::of({0, 1}));
  CHECK(s4.weights[2] == doctest::Approx(1.0));
  CHECK(s4.weights[3] == 0.0);

  GraphSpec iso;
  iso.initial_weights = {0.5, 0.5};
  iso.transition = SquareMatrix(2);
  auto s2 = update_after_rejection(validate_graph(iso).initial_state(), 0);
  CHECK(s2.weights[1] == 0.5);
}

TEST_CASE("update rule agrees with the dense oracle") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const int m = 2 + rep % 5;
    auto spec = random_graph(rng, m);
    auto g = validate_graph(spec);
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(1 + rep % m);
    GraphState s = g.initial_state();
    for (int j : order) reject_in_place(s, j);
    auto w = oracle_levels(spec, order);
    for (int j = 0; j < m; ++j) CHECK(s.weights[j] == doctest::Approx(w[j]).epsilon(1e-12));
    double sum = 0.0;
    for (int j : s.active.indices()) sum += s.weights[j];
    CHECK(sum <= 1.0 + kConservationTolerance);
    for (int i = 0; i < m; ++i) CHECK(s.transition.row_sum(i) <= 1.0 + kConservationTolerance);
  }
}

TEST_CASE("single stage test") {
  auto h = validate_graph(hierarchical(4));
  std::vector<double> p{0.02, 0.04, 0.02, 0.02};
  CHECK(run_single_stage_test(h, p, 0.025).rejected == IndexSet::of({0}));

  std::vector<double> ones(4, 1.0);
  auto r = run_single_stage_test(h, ones, 0.025);
  CHECK(r.rejected.empty());
  CHECK(r.final_state.weights == h.spec().initial_weights);

  GraphSpec gs = hierarchical(4);
  gs.transition(3, 0) = 0.0;
  GraphSpec unreachable;
  unreachable.initial_weights = {1.0, 0.0};
  unreachable.transition = SquareMatrix(2);
  std::vector<double> zeros{0.0, 0.0};
  CHECK(run_single_stage_test(validate_graph(unreachable), zeros, 0.025).rejected == IndexSet::full(2));
  std::vector<double> zeros4(4, 0.0);
  CHECK(run_single_stage_test(h, zeros4, 0.025).rejected == IndexSet::full(4));
}

TEST_CASE("rejection set does not depend on the order of eligible choices") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 0.1);
  for (int rep = 0; rep < 300; ++rep) {
    const int m = 2 + rep % 3;
    auto g = validate_graph(random_graph(rng, m));
    std::vector<double> p(m);
    for (double& x : p) x = u(rng);
    const double alpha = 0.05;
    const auto reference = run_single_stage_test(g, p, alpha).rejected;
    // Explore every ordering of eligible choices depth first.
    std::vector<GraphState> stack{g.initial_state()};
    while (!stack.empty()) {
      GraphState s = stack.back();
      stack.pop_back();
      bool any = false;
      for (int j : s.active.indices()) {
        if (p[j] <= s.weights[j] * alpha) {
          any = true;
          stack.push_back(update_after_rejection(s, j));
        }
      }
      if (!any) CHECK((IndexSet::full(m) - s.active) == reference);
    }
  }
}

TEST_CASE("dual graph for the hierarchical test") {
  auto h = validate_graph(hierarchical(4));
  const double q = 0.3;
  std::vector<double> mu{0.7, 1.3, -0.4, 2.0};
  auto d = build_dual_graph(h, mu, q);
  const double q1 = std::pow(q, mu[0]), q2 = std::pow(q, mu[1]);
  CHECK(d.base.transition(0, 1) == doctest::Approx(1.0 - q1));
  CHECK(d.base.transition(0, 4) == doctest::Approx(q1));
  CHECK(d.base.transition(1, 6) == doctest::Approx(1.0 - q2));
  CHECK(d.base.transition(1, 5) == doctest::Approx(q2));
  CHECK(d.base.transition(3, 7) == doctest::Approx(1.0));
  CHECK(!d.base.active.contains(2));
  for (int i = 0; i < 8; ++i) CHECK(d.base.transition.row_sum(i) <= 1.0 + 1e-12);

  const double alpha = 0.025;
  auto lv = local_levels(h, mu, q, alpha);
  CHECK(lv.alpha_mu[0] == doctest::Approx(q1 * alpha));
  CHECK(lv.alpha_mu[1] == doctest::Approx((1 - q1) * q2 * alpha));
  CHECK(lv.alpha_mu[2] == doctest::Approx((1 - q1) * (1 - q2) * alpha));
  CHECK(lv.alpha_mu[3] == 0.0);

  std::vector<double> neg{-1.0, kMinusInf, 0.0, -2.0};
  auto base = local_levels(h, neg, q, alpha);
  for (int j = 0; j < 4; ++j) CHECK(base.alpha_mu[j] == doctest::Approx(h.spec().initial_weights[j] * alpha));

  GraphSpec one;
  one.initial_weights = {1.0};
  one.transition = SquareMatrix(1);
  auto g1 = validate_graph(one);
  std::vector<double> m1{1.7};
  auto d1 = build_dual_graph(g1, m1, q);
  CHECK(d1.base.transition(0, 1) == doctest::Approx(1.0));
  // the whole level moves to the shifted copy
  auto l1 = local_levels(g1, m1, q, alpha);
  CHECK(l1.alpha_mu[0] == doctest::Approx(alpha));
  CHECK(l1.nu[0] == doctest::Approx(std::pow(q, -1.7)));

  // a complete row keeps only q^mu on the shifted node
  GraphSpec pair;
  pair.initial_weights = {1.0, 0.0};
  pair.transition = SquareMatrix(2);
  pair.transition(0, 1) = 1.0;
  pair.transition(1, 0) = 1.0;
  std::vector<double> m2{1.7, -0.5};
  auto l2 = local_levels(validate_graph(pair), m2, q, alpha);
  CHECK(l2.alpha_mu[0] == doctest::Approx(std::pow(q, 1.7) * alpha));
  CHECK(l2.nu[0] == doctest::Approx(1.0));

  CHECK_THROWS_AS(build_dual_graph(h, mu, 1.0), Error);
  CHECK_THROWS_AS(build_dual_graph(h, mu, 0.0), Error);
}

TEST_CASE("local level properties on random graphs") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double alpha = 0.025;
  for (int rep = 0; rep < 300; ++rep) {
    const int m = 2 + rep % 4;
    auto g = validate_graph(random_graph(rng, m));
    const double q = 0.05 + 0.9 * u(rng);
    std::vector<double> mu(m);
    for (double& x : mu) x = u(rng) < 0.1 ? kMinusInf : n(rng);
    auto lv = local_levels(g, mu, q, alpha);
    const double total = std::accumulate(lv.alpha_mu.begin(), lv.alpha_mu.end(), 0.0);
    const double w = std::accumulate(g.spec().initial_weights.begin(), g.spec().initial_weights.end(), 0.0);
    CHECK(total == doctest::Approx(w * alpha).epsilon(1e-10));
    for (int j = 0; j < m; ++j) {
      CHECK(std::pow(q, std::max(mu[j], 0.0)) * lv.nu[j] <= 1.0 + 1e-10);
      if (mu[j] <= 0.0) CHECK(lv.alpha_mu[j] >= g.spec().initial_weights[j] * alpha - 1e-15);
    }
    // nu_j non-decreasing in mu_i, and unchanged by moving a non-positive mu_i
    const int i = rep % m;
    auto up = mu;
    up[i] = (mu[i] == kMinusInf ? 0.0 : mu[i]) + std::abs(n(rng));
    auto lu = local_levels(g, up, q, alpha);
    for (int j = 0; j < m; ++j) {
      if (j != i) CHECK(lu.nu[j] >= lv.nu[j] - 1e-12);
    }
    if (mu[i] <= 0.0) {
      auto moved = mu;
      moved[i] = -u(rng) * 5.0;
      auto lm = local_levels(g, moved, q, alpha);
      for (int j = 0; j < m; ++j) {
        if (j != i) CHECK(lm.alpha_mu[j] == doctest::Approx(lv.alpha_mu[j]).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("small q recovers the levels of the original test") {
  // With q -> 0 the shifted nodes only collect what leaks out of non-complete
  // rows, so the local levels are absorption masses of the transition chain:
  // x^T (I - G) = w^T, alpha_j = x_j (1 - s_j).
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1.0, 3.0);
  int checked = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int m = 2 + rep % 4;
    auto spec = random_graph(rng, m);
    for (int i = 0; i < m; ++i) {
      const double s = spec.transition.row_sum(i);
      if (s > 0.0) {
        for (int j = 0; j < m; ++j) spec.transition(i, j) *= std::min(s, 0.9) / s;
      }
    }
    auto g = validate_graph(spec);
    std::vector<std::vector<double>> a(m, std::vector<double>(m + 1));
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < m; ++i) a[j][i] = (i == j ? 1.0 : 0.0) - spec.transition(i, j);
      a[j][m] = spec.initial_weights[j];
    }
    for (int c = 0; c < m; ++c) {
      int piv = c;
      for (int r = c + 1; r < m; ++r)
        if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
      std::swap(a[c], a[piv]);
      for (int r = 0; r < m; ++r) {
        if (r == c) continue;
        const double f = a[r][c] / a[c][c];
        for (int k = c; k <= m; ++k) a[r][k] -= f * a[c][k];
      }
    }
    std::vector<double> mu(m);
    for (double& x : mu) x = u(rng);
    auto lv = local_levels(g, mu, 1e-6, 1.0);
    for (int j = 0; j < m; ++j) {
      const double expected = a[j][m] / a[j][j] * (1.0 - spec.transition.row_sum(j));
      CHECK(lv.alpha_mu[j] == doctest::Approx(expected).epsilon(1e-4));
    }
    ++checked;
  }
  CHECK(checked == 200);
}
