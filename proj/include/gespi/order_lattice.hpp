#pragma once

// Partially ordered action spaces with meet/join.
//
// Convention throughout the library: a ⪯ b means "a is at most as risky as b"
// (a rejects less, a prediction set is larger, a threshold is more
// conservative). meet moves toward the conservative side, join away from it.

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace gespi {

/// Accept (0) or reject (1).
class BinaryDecision {
 public:
  constexpr BinaryDecision() = default;
  constexpr explicit BinaryDecision(bool reject) : reject_(reject) {}

  static BinaryDecision from_int(int value);

  constexpr bool rejects() const { return reject_; }
  constexpr int value() const { return reject_ ? 1 : 0; }

  friend constexpr bool operator==(BinaryDecision, BinaryDecision) = default;

 private:
  bool reject_ = false;
};

/// Subset of hypothesis indices {1..m}, kept sorted and unique.
class RejectionSet {
 public:
  explicit RejectionSet(std::size_t m, std::vector<std::size_t> members = {});

  static RejectionSet none(std::size_t m) { return RejectionSet(m); }
  static RejectionSet all(std::size_t m);

  std::size_t m() const { return m_; }
  const std::vector<std::size_t>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  bool contains(std::size_t index) const;

  friend bool operator==(const RejectionSet&, const RejectionSet&) = default;

 private:
  std::size_t m_;
  std::vector<std::size_t> members_;
};

/// Which side of a scalar threshold is the conservative one.
enum class Direction {
  LargerIsMoreConservative,
  SmallerIsMoreConservative,
};

/// Scalar-indexed action (conformal quantile, risk-control lambda).
/// Thresholds may be ±infinity but never NaN.
class ThresholdAction {
 public:
  ThresholdAction(double threshold, Direction direction);

  double threshold() const { return threshold_; }
  Direction direction() const { return direction_; }

  friend bool operator==(const ThresholdAction&,
                         const ThresholdAction&) = default;

 private:
  double threshold_;
  Direction direction_;
};

using PartialAction = std::variant<BinaryDecision, RejectionSet, ThresholdAction>;

BinaryDecision meet(BinaryDecision a, BinaryDecision b);
BinaryDecision join(BinaryDecision a, BinaryDecision b);
bool leq(BinaryDecision a, BinaryDecision b);

// The following throw std::domain_error when a and b come from different
// action spaces (different m, different direction, different alternative).
RejectionSet meet(const RejectionSet& a, const RejectionSet& b);
RejectionSet join(const RejectionSet& a, const RejectionSet& b);
bool leq(const RejectionSet& a, const RejectionSet& b);

ThresholdAction meet(const ThresholdAction& a, const ThresholdAction& b);
ThresholdAction join(const ThresholdAction& a, const ThresholdAction& b);
bool leq(const ThresholdAction& a, const ThresholdAction& b);

PartialAction meet(const PartialAction& a, const PartialAction& b);
PartialAction join(const PartialAction& a, const PartialAction& b);
bool leq(const PartialAction& a, const PartialAction& b);

std::string describe(const PartialAction& action);

/// Bounded loss that is monotone in the action order. The evaluator is user
/// supplied; evaluate() enforces the [0, bound] range on every call.
template <class Action, class Point>
struct LossSpec {
  double bound = 1.0;
  std::function<double(const Action&, const Point&)> evaluator;

  double evaluate(const Action& action, const Point& point) const {
    const double value = evaluator(action, point);
    if (!(value >= 0.0 && value <= bound)) {
      throw std::domain_error("loss value " + std::to_string(value) +
                              " outside [0, " + std::to_string(bound) + "]");
    }
    return value;
  }
};

/// Miscoverage 1{score > threshold} for LargerIsMoreConservative thresholds.
LossSpec<ThresholdAction, double> miscoverage_loss();

/// Type I error indicator: the decision itself (evaluation point unused).
LossSpec<BinaryDecision, int> rejection_loss();

/// k-FWER indicator 1{|S ∩ nulls| >= k}; nulls is the evaluation point.
LossSpec<RejectionSet, std::vector<std::size_t>> kfwer_loss(std::size_t k);

}  // namespace gespi
