#pragma once

#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include "gsci/boundaries.hpp"
#include "gsci/graph.hpp"
#include "gsci/pvalues.hpp"

namespace testing {

using namespace gsci;

inline GraphSpec hierarchical(int m) {
  GraphSpec s;
  s.initial_weights.assign(m, 0.0);
  s.initial_weights[0] = 1.0;
  s.transition = SquareMatrix(m);
  for (int i = 0; i + 1 < m; ++i) s.transition(i, i + 1) = 1.0;
  return s;
}

// Two hypotheses passing their whole level to each other.
inline GraphSpec complete_pair(double w1) {
  GraphSpec s;
  s.initial_weights = {w1, 1.0 - w1};
  s.transition = SquareMatrix(2);
  s.transition(0, 1) = s.transition(1, 0) = 1.0;
  return s;
}

inline GraphSpec three_node_general() {
  GraphSpec s;
  s.initial_weights = {0.5, 0.5, 0.0};
  s.transition = SquareMatrix(3);
  s.transition(0, 1) = 0.5;
  s.transition(0, 2) = 0.5;
  s.transition(1, 0) = 0.5;
  s.transition(1, 2) = 0.5;
  s.transition(2, 0) = 0.5;
  s.transition(2, 1) = 0.5;
  return s;
}

inline GraphSpec random_graph(std::mt19937_64& rng, int m) {
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

inline std::vector<double> equal_fractions(int K) {
  std::vector<double> t;
  for (int k = 1; k <= K; ++k) t.push_back(static_cast<double>(k) / K);
  return t;
}

inline std::shared_ptr<const NominalLevelCurve> curve(int K, SpendingFunction f = SpendingFunction::pocock_like()) {
  return shared_curve(f, equal_fractions(K));
}

inline std::vector<std::shared_ptr<const NominalLevelCurve>> curves(int m, int K,
                                                                    SpendingFunction f = SpendingFunction::pocock_like()) {
  return std::vector<std::shared_ptr<const NominalLevelCurve>>(m, curve(K, f));
}

// Estimates (unit standard error) whose repeated p-values at 0 are the given ones.
inline PValueFamily family_from_pvalues(const std::vector<std::vector<double>>& p, int K) {
  auto c = curve(K);
  std::vector<std::vector<StageEstimate>> data(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    for (std::size_t k = 0; k < p[j].size(); ++k) {
      data[j].push_back({-c->probit(static_cast<int>(k), p[j][k]), 1.0});
    }
  }
  return PValueFamily(curves(static_cast<int>(p.size()), K), data);
}

// Brownian-motion estimates of theta with information fractions k/K and
// final standard error se.
inline std::vector<std::vector<StageEstimate>> simulate_estimates(std::mt19937_64& rng,
                                                                  const std::vector<double>& theta, int K,
                                                                  double se = 1.0) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<StageEstimate>> out(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    double w = 0.0;
    for (int k = 1; k <= K; ++k) {
      w += z(rng) * std::sqrt(1.0 / K);
      const double t = static_cast<double>(k) / K;
      out[j].push_back({theta[j] + se * w / t, se / std::sqrt(t)});
    }
  }
  return out;
}

inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace testing
