#include "gespi/order_lattice.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <sstream>

namespace gespi {

BinaryDecision BinaryDecision::from_int(int value) {
  if (value != 0 && value != 1) {
    throw std::domain_error("binary decision must be 0 or 1, got " +
                            std::to_string(value));
  }
  return BinaryDecision(value == 1);
}

RejectionSet::RejectionSet(std::size_t m, std::vector<std::size_t> members)
    : m_(m), members_(std::move(members)) {
  if (m_ == 0) throw std::domain_error("rejection set needs m >= 1");
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  if (!members_.empty() && (members_.front() < 1 || members_.back() > m_)) {
    throw std::domain_error("rejection set member outside {1.." +
                            std::to_string(m_) + "}");
  }
}

RejectionSet RejectionSet::all(std::size_t m) {
  std::vector<std::size_t> members(m);
  for (std::size_t j = 0; j < m; ++j) members[j] = j + 1;
  return RejectionSet(m, std::move(members));
}

bool RejectionSet::contains(std::size_t index) const {
  return std::binary_search(members_.begin(), members_.end(), index);
}

ThresholdAction::ThresholdAction(double threshold, Direction direction)
    : threshold_(threshold), direction_(direction) {
  if (std::isnan(threshold)) {
    throw std::domain_error("threshold action cannot be NaN");
  }
}

BinaryDecision meet(BinaryDecision a, BinaryDecision b) {
  return BinaryDecision(a.rejects() && b.rejects());
}

BinaryDecision join(BinaryDecision a, BinaryDecision b) {
  return BinaryDecision(a.rejects() || b.rejects());
}

bool leq(BinaryDecision a, BinaryDecision b) { return a.value() <= b.value(); }

namespace {

void require_same_space(const RejectionSet& a, const RejectionSet& b) {
  if (a.m() != b.m()) {
    throw std::domain_error("rejection sets over different m (" +
                            std::to_string(a.m()) + " vs " +
                            std::to_string(b.m()) + ")");
  }
}

void require_same_space(const ThresholdAction& a, const ThresholdAction& b) {
  if (a.direction() != b.direction()) {
    throw std::domain_error("threshold actions with different directions");
  }
}

// True if x is at least as conservative as y.
bool at_least_as_conservative(const ThresholdAction& x,
                              const ThresholdAction& y) {
  return x.direction() == Direction::LargerIsMoreConservative
             ? x.threshold() >= y.threshold()
             : x.threshold() <= y.threshold();
}

}  // namespace

RejectionSet meet(const RejectionSet& a, const RejectionSet& b) {
  require_same_space(a, b);
  std::vector<std::size_t> out;
  std::set_intersection(a.members().begin(), a.members().end(),
                        b.members().begin(), b.members().end(),
                        std::back_inserter(out));
  return RejectionSet(a.m(), std::move(out));
}

RejectionSet join(const RejectionSet& a, const RejectionSet& b) {
  require_same_space(a, b);
  std::vector<std::size_t> out;
  std::set_union(a.members().begin(), a.members().end(), b.members().begin(),
                 b.members().end(), std::back_inserter(out));
  return RejectionSet(a.m(), std::move(out));
}

bool leq(const RejectionSet& a, const RejectionSet& b) {
  require_same_space(a, b);
  return std::includes(b.members().begin(), b.members().end(),
                       a.members().begin(), a.members().end());
}

ThresholdAction meet(const ThresholdAction& a, const ThresholdAction& b) {
  require_same_space(a, b);
  return at_least_as_conservative(a, b) ? a : b;
}

ThresholdAction join(const ThresholdAction& a, const ThresholdAction& b) {
  require_same_space(a, b);
  return at_least_as_conservative(a, b) ? b : a;
}

bool leq(const ThresholdAction& a, const ThresholdAction& b) {
  require_same_space(a, b);
  return at_least_as_conservative(a, b);
}

namespace {

template <class F>
auto visit_same(const PartialAction& a, const PartialAction& b, F&& f) {
  if (a.index() != b.index()) {
    throw std::domain_error("actions from different action spaces");
  }
  return std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        return f(x, std::get<T>(b));
      },
      a);
}

}  // namespace

PartialAction meet(const PartialAction& a, const PartialAction& b) {
  return visit_same(a, b, [](const auto& x, const auto& y) -> PartialAction {
    return meet(x, y);
  });
}

PartialAction join(const PartialAction& a, const PartialAction& b) {
  return visit_same(a, b, [](const auto& x, const auto& y) -> PartialAction {
    return join(x, y);
  });
}

bool leq(const PartialAction& a, const PartialAction& b) {
  return visit_same(a, b,
                    [](const auto& x, const auto& y) { return leq(x, y); });
}

std::string describe(const PartialAction& action) {
  std::ostringstream os;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, BinaryDecision>) {
          os << x.value();
        } else if constexpr (std::is_same_v<T, RejectionSet>) {
          os << '{';
          for (std::size_t i = 0; i < x.members().size(); ++i) {
            if (i) os << ',';
            os << x.members()[i];
          }
          os << '}';
        } else {
          os << x.threshold();
        }
      },
      action);
  return os.str();
}

LossSpec<ThresholdAction, double> miscoverage_loss() {
  return {1.0, [](const ThresholdAction& a, const double& score) {
            if (a.direction() != Direction::LargerIsMoreConservative) {
              throw std::domain_error("miscoverage needs a quantile threshold");
            }
            return score > a.threshold() ? 1.0 : 0.0;
          }};
}

LossSpec<BinaryDecision, int> rejection_loss() {
  return {1.0, [](const BinaryDecision& a, const int&) {
            return static_cast<double>(a.value());
          }};
}

LossSpec<RejectionSet, std::vector<std::size_t>> kfwer_loss(std::size_t k) {
  if (k == 0) throw std::domain_error("k-FWER needs k >= 1");
  return {1.0, [k](const RejectionSet& s, const std::vector<std::size_t>& nulls) {
            std::size_t false_rejections = 0;
            for (std::size_t j : nulls) false_rejections += s.contains(j) ? 1 : 0;
            return false_rejections >= k ? 1.0 : 0.0;
          }};
}

}  // namespace gespi
