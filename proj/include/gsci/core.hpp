#pragma once

#include <bit>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsci {

// Hypotheses are indexed from 0 internally; external formats use 1-based numbers.
inline constexpr int kMaxHypotheses = 32;

inline constexpr double kMinusInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPlusInf = std::numeric_limits<double>::infinity();

inline bool is_minus_inf(double x) { return x == kMinusInf; }

enum class Errc {
  WeightSumExceeded,
  RowSumExceeded,
  NegativeWeight,
  DimensionMismatch,
  InvalidWeight,
  InactiveNode,
  OutOfDomain,
  SpentIncrementNonpositive,
  ConvergenceFailure,
  SpendingMonotonicityViolation,
  MissingObservation,
  StageOverrun,
  NotCollecting,
  InvalidStartVector,
  NotPSD,
  ParseError,
  ValidationError,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Small bitset over hypothesis indices.
class IndexSet {
 public:
  constexpr IndexSet() = default;
  static IndexSet full(int n) {
    IndexSet s;
    s.bits_ = n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
    return s;
  }
  static IndexSet of(std::initializer_list<int> idx) {
    IndexSet s;
    for (int i : idx) s.insert(i);
    return s;
  }

  bool contains(int i) const { return (bits_ >> i) & 1u; }
  void insert(int i) { bits_ |= std::uint64_t{1} << i; }
  void erase(int i) { bits_ &= ~(std::uint64_t{1} << i); }
  int size() const { return std::popcount(bits_); }
  bool empty() const { return bits_ == 0; }
  bool subset_of(IndexSet o) const { return (bits_ & ~o.bits_) == 0; }

  IndexSet operator|(IndexSet o) const { return from_bits(bits_ | o.bits_); }
  IndexSet operator&(IndexSet o) const { return from_bits(bits_ & o.bits_); }
  IndexSet operator-(IndexSet o) const { return from_bits(bits_ & ~o.bits_); }
  bool operator==(const IndexSet&) const = default;

  std::vector<int> indices() const {
    std::vector<int> out;
    for (std::uint64_t b = bits_; b; b &= b - 1) out.push_back(std::countr_zero(b));
    return out;
  }
  std::uint64_t bits() const { return bits_; }
  static IndexSet from_bits(std::uint64_t b) {
    IndexSet s;
    s.bits_ = b;
    return s;
  }

 private:
  std::uint64_t bits_ = 0;
};

// Formats as "{1,2}" using 1-based numbering.
std::string format_set(IndexSet s);

// Dense row-major square matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(int n, double fill = 0.0) : n_(n), a_(static_cast<std::size_t>(n) * n, fill) {}

  int size() const { return n_; }
  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  double row_sum(int i) const {
    double s = 0.0;
    for (int j = 0; j < n_; ++j) s += (*this)(i, j);
    return s;
  }
  bool operator==(const SquareMatrix&) const = default;

 private:
  int n_ = 0;
  std::vector<double> a_;
};

}  // namespace gsci
