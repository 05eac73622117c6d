#include "gsci/pvalues.hpp"

#include <algorithm>
#include <cmath>

#include "gsci/normal.hpp"

namespace gsci {

const char* to_string(PKind kind) { return kind == PKind::Repeated ? "r" : "s"; }

PValueTable::PValueTable(std::vector<std::vector<double>> repeated) : repeated_(std::move(repeated)) {
  for (const auto& row : repeated_) {
    for (double p : row) {
      if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::OutOfDomain, "p-values must be in [0,1]");
    }
  }
}

double PValueTable::value(int j, int k, PKind kind) const {
  if (k < 0 || k >= observed_stages(j)) throw Error(Errc::MissingObservation, "no p-value for this stage");
  if (kind == PKind::Repeated) return repeated_[j][k];
  return *std::min_element(repeated_[j].begin(), repeated_[j].begin() + k + 1);
}

PValueFamily::PValueFamily(std::vector<std::shared_ptr<const NominalLevelCurve>> curves,
                           std::vector<std::vector<StageEstimate>> data)
    : curves_(std::move(curves)), data_(std::move(data)) {
  if (curves_.size() != data_.size()) throw Error(Errc::DimensionMismatch, "one curve per hypothesis expected");
  for (std::size_t j = 0; j < data_.size(); ++j) {
    if (static_cast<int>(data_[j].size()) > curves_[j]->stages()) {
      throw Error(Errc::StageOverrun, "more stages observed than planned for H" + std::to_string(j + 1));
    }
    for (const auto& e : data_[j]) {
      if (!std::isfinite(e.estimate) || !(e.std_error > 0.0) || !std::isfinite(e.std_error)) {
        throw Error(Errc::ValidationError, "estimates must be finite with positive standard errors");
      }
    }
  }
}

void PValueFamily::set_estimate(int j, int k, double estimate) {
  check(j, k);
  data_[j][k].estimate = estimate;
}

void PValueFamily::append(int j, StageEstimate e) {
  if (static_cast<int>(data_[j].size()) >= curves_[j]->stages()) {
    throw Error(Errc::StageOverrun, "all planned stages of H" + std::to_string(j + 1) + " are observed");
  }
  data_[j].push_back(e);
}

void PValueFamily::check(int j, int k) const {
  if (j < 0 || j >= hypotheses()) throw Error(Errc::DimensionMismatch, "hypothesis index out of range");
  if (k < 0 || k >= observed_stages(j)) {
    throw Error(Errc::MissingObservation,
                "H" + std::to_string(j + 1) + " has no data at stage " + std::to_string(k + 1));
  }
}

double PValueFamily::local(int j, int k, double mu) const {
  check(j, k);
  const auto& d = data_[j][k];
  return normal::sf((d.estimate - mu) / d.std_error);
}

double PValueFamily::probit_of(int j, int k, PKind kind, double mu) const {
  check(j, k);
  if (mu == kMinusInf) return kMinusInf;
  const int first = kind == PKind::Repeated ? k : 0;
  double best = kPlusInf;
  for (int s = first; s <= k; ++s) {
    const auto& d = data_[j][s];
    best = std::min(best, curves_[j]->invert_probit(s, (mu - d.estimate) / d.std_error));
  }
  return best;
}

double PValueFamily::repeated(int j, int k, double mu) const {
  return normal::cdf(probit_of(j, k, PKind::Repeated, mu));
}

double PValueFamily::sequential(int j, int k, double mu) const {
  return normal::cdf(probit_of(j, k, PKind::Sequential, mu));
}

double PValueFamily::shift_at(int j, int k, PKind kind, double u) const {
  check(j, k);
  if (u == kMinusInf) return kMinusInf;
  const int first = kind == PKind::Repeated ? k : 0;
  double best = kMinusInf;
  for (int s = first; s <= k; ++s) {
    const auto& d = data_[j][s];
    best = std::max(best, d.estimate + d.std_error * curves_[j]->probit_at(s, u));
  }
  return best;
}

double PValueFamily::inverse(int j, int k, PKind kind, double gamma) const {
  check(j, k);
  if (gamma <= 0.0) return kMinusInf;
  const int first = kind == PKind::Repeated ? k : 0;
  double best = kMinusInf;
  for (int s = first; s <= k; ++s) {
    const auto& d = data_[j][s];
    best = std::max(best, d.estimate + d.std_error * curves_[j]->probit(s, std::min(gamma, 1.0)));
  }
  return best;
}

}  // namespace gsci
