#pragma once

#include <memory>
#include <vector>

#include "gsci/boundaries.hpp"
#include "gsci/core.hpp"

namespace gsci {

enum class PKind { Repeated, Sequential };

const char* to_string(PKind kind);

// Decisions of the sequential tests only need to know whether a p-value of
// hypothesis j at stage k (0-based) is at or below a level.
class PValueSource {
 public:
  virtual ~PValueSource() = default;
  virtual int hypotheses() const = 0;
  virtual int observed_stages(int j) const = 0;
  virtual bool significant(int j, int k, PKind kind, double level) const = 0;
};

// Repeated p-values at mu = 0 given directly, e.g. from a published table.
class PValueTable : public PValueSource {
 public:
  // repeated[j][k] = p^r_{j,k}(0)
  explicit PValueTable(std::vector<std::vector<double>> repeated);

  int hypotheses() const override { return static_cast<int>(repeated_.size()); }
  int observed_stages(int j) const override { return static_cast<int>(repeated_[j].size()); }
  double value(int j, int k, PKind kind) const;
  bool significant(int j, int k, PKind kind, double level) const override {
    return value(j, k, kind) <= level;
  }

 private:
  std::vector<std::vector<double>> repeated_;
};

struct StageEstimate {
  double estimate = 0.0;
  double std_error = 1.0;
};

// Repeated and sequential p-values built from stagewise estimates and the
// nominal level curve of each hypothesis.
class PValueFamily : public PValueSource {
 public:
  PValueFamily(std::vector<std::shared_ptr<const NominalLevelCurve>> curves,
               std::vector<std::vector<StageEstimate>> data);

  int hypotheses() const override { return static_cast<int>(curves_.size()); }
  int observed_stages(int j) const override { return static_cast<int>(data_[j].size()); }
  const NominalLevelCurve& curve(int j) const { return *curves_[j]; }
  const StageEstimate& data(int j, int k) const { return data_[j][k]; }

  // Observed estimates may be replaced (paired evaluations); stages must exist.
  void set_estimate(int j, int k, double estimate);
  void append(int j, StageEstimate e);

  double local(int j, int k, double mu) const;
  double repeated(int j, int k, double mu) const;
  double sequential(int j, int k, double mu) const;
  double pvalue(int j, int k, PKind kind, double mu) const {
    return kind == PKind::Repeated ? repeated(j, k, mu) : sequential(j, k, mu);
  }

  // Largest mu with p(mu) <= gamma; -inf at gamma = 0.
  double inverse(int j, int k, PKind kind, double gamma) const;

  // The shift mu at which the p-value equals Phi(u). Increasing in u.
  double shift_at(int j, int k, PKind kind, double u) const;
  // Probit of the p-value at mu (inverse of shift_at); +inf when p = 1.
  double probit_of(int j, int k, PKind kind, double mu) const;

  // Rejection is decided through the inverse so that bounds and tests agree.
  bool significant(int j, int k, PKind kind, double level) const override {
    return inverse(j, k, kind, level) >= 0.0;
  }

 private:
  void check(int j, int k) const;

  std::vector<std::shared_ptr<const NominalLevelCurve>> curves_;
  std::vector<std::vector<StageEstimate>> data_;
};

}  // namespace gsci
