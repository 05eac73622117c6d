#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsci/core.hpp"
#include "gsci/spending.hpp"

namespace gsci {

enum class Execution { Serial, Parallel };

// Simpson quadrature for the no-crossing sub-density recursion. The grid
// starts at `lower` and ends exactly on the previous stage's boundary.
struct QuadratureOptions {
  double lower = -8.5;
  double max_step = 0.02;
  double boundary_tolerance = 1e-10;
};

// Rejection boundaries on the z-scale (reject when Z_k >= c_k) for stages
// 1..upto (all stages when upto < 0). Nominal levels are 1 - Phi(c_k).
std::vector<double> nominal_boundaries(const SpendingFunction& f, std::span<const double> fractions, double gamma,
                                       const QuadratureOptions& opts = {}, int upto = -1);

std::vector<double> nominal_levels(const SpendingFunction& f, std::span<const double> fractions, double gamma,
                                   const QuadratureOptions& opts = {});

// Per-stage null crossing probabilities for a given boundary vector.
std::vector<double> crossing_probabilities(std::span<const double> fractions, std::span<const double> boundaries,
                                           const QuadratureOptions& opts = {});

void validate_fractions(std::span<const double> fractions);

struct CurveOptions {
  QuadratureOptions quadrature;
  bool tabulate = true;
  // Table nodes are uniform in u = Phi^{-1}(gamma).
  double table_lower = -12.0;
  double table_upper = 8.0;
  double table_step = 0.05;
  Execution execution = Execution::Parallel;
};

// alpha*_k(gamma) for one hypothesis: spending function plus information
// schedule. Values are handled on the probit scale, Phi^{-1}(alpha*_k).
class NominalLevelCurve {
 public:
  NominalLevelCurve(SpendingFunction f, std::vector<double> fractions, CurveOptions opts = {});

  int stages() const { return static_cast<int>(fractions_.size()); }
  const SpendingFunction& spending() const { return spending_; }
  std::span<const double> fractions() const { return fractions_; }
  const CurveOptions& options() const { return opts_; }

  // Phi^{-1}(alpha*_k(gamma)), stage k is 0-based; -inf at gamma = 0.
  double probit(int k, double gamma) const;
  double level(int k, double gamma) const;
  // Same as probit() but parametrised by u = Phi^{-1}(gamma); also returns
  // the derivative with respect to u when requested.
  double probit_at(int k, double u, double* slope = nullptr) const;

  // gamma with alpha*_k(gamma) = nominal; 1 when nominal exceeds alpha*_k(1).
  double invert(int k, double nominal) const;
  // Same on the probit scale: u with probit_at(k, u) = y, +inf when y is at
  // or above probit(k, 1).
  double invert_probit(int k, double y) const;

  // Recursion result for every stage at gamma (memoised).
  std::vector<double> exact_probits(double gamma) const;

  // Throws SpendingMonotonicityViolation when monotonicity in gamma cannot
  // be confirmed up to gamma.
  void ensure_monotone(double gamma) const;

 private:
  double probit_exact(int k, double gamma) const;
  // Stages 0..upto-1 only.
  std::vector<double> exact_prefix(double gamma, int upto) const;
  double table_eval(int k, double u, double* slope) const;
  void build_table();

  SpendingFunction spending_;
  std::vector<double> fractions_;
  CurveOptions opts_;

  // table_[k][i]: probit at node i; deriv_[k][i]: d/du.
  std::vector<std::vector<double>> table_;
  std::vector<std::vector<double>> deriv_;
  int nodes_ = 0;
  double monotone_upper_u_ = 0.0;

  mutable std::shared_mutex memo_mutex_;
  mutable std::unordered_map<double, std::vector<double>> memo_;
  mutable std::atomic<double> verified_gamma_{0.0};
  mutable std::atomic<bool> warned_{false};
};

// Shared curves keyed by spending function, schedule and options.
std::shared_ptr<const NominalLevelCurve> shared_curve(const SpendingFunction& f, const std::vector<double>& fractions,
                                                      const CurveOptions& opts = {});

// Warning sink (stderr by default).
void set_warning_handler(void (*handler)(const std::string&));
void warn(const std::string& message);

}  // namespace gsci
