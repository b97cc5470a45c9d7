#pragma once

// The GESPI wrapper: run a base procedure on the real data at alpha, on the
// pooled data at alpha, and on the real data at alpha + epsilon, then combine
//
//   one-sided:  pooled ∧ guardrail
//   two-sided:  base ∨ (pooled ∧ guardrail)
//
// in the action lattice of order_lattice.hpp.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gespi/order_lattice.hpp"
#include "gespi/random.hpp"

namespace gespi {

enum class GuardrailVariant { OneSided, TwoSided };

struct GespiConfig {
  double alpha = 0.05;
  double epsilon = 0.02;
  GuardrailVariant variant = GuardrailVariant::TwoSided;
  std::uint64_t seed = 0;

  /// Throws std::domain_error unless 0 < alpha, 0 <= epsilon, alpha+epsilon < 1.
  void validate() const;
};

template <class Action>
struct GespiOutput {
  Action action;
  Action base_action;       // run(real, alpha)
  Action guardrail_action;  // run(real, alpha + epsilon)
  Action pooled_action;     // run(real ++ synth, alpha)
};

/// A level-indexed inference procedure over records of type Record.
///
/// Contract: run must be invariant to permutations of its input (the pooled
/// dataset is passed as real records followed by synthetic ones), and when
/// monotone_in_level is set, run(D, a1, s) ⪯ run(D, a2, s) for a1 <= a2 and
/// a fixed randomization seed s.
template <class Record>
struct BaseProcedure {
  std::function<PartialAction(std::span<const Record> data, double level,
                              std::uint64_t seed)>
      run;
  bool monotone_in_level = true;
};

/// Randomization seeds handed to the base procedure. The two runs on the real
/// data share one stream: monotonicity in the level only holds for a fixed
/// randomization, and the sandwich guarantee rests on it. The pooled run gets
/// an independent stream.
struct GespiStreams {
  std::uint64_t real;
  std::uint64_t pooled;
};

inline GespiStreams gespi_streams(std::uint64_t seed) {
  return {derive_seed(seed, {0}), derive_seed(seed, {1})};
}

/// Lattice combination of three already computed component actions.
template <class Action>
GespiOutput<Action> combine(GuardrailVariant variant, Action base,
                            Action pooled, Action guardrail) {
  Action pooled_and_guard = meet(pooled, guardrail);
  Action action = variant == GuardrailVariant::TwoSided
                      ? Action(join(base, pooled_and_guard))
                      : pooled_and_guard;
  return {std::move(action), std::move(base), std::move(guardrail),
          std::move(pooled)};
}

template <class Record>
GespiOutput<PartialAction> gespi(const BaseProcedure<Record>& proc,
                                 std::span<const Record> real,
                                 std::span<const Record> synth,
                                 const GespiConfig& cfg) {
  cfg.validate();
  if (real.empty()) throw std::domain_error("GESPI needs a nonempty real dataset");

  std::vector<Record> pooled;
  pooled.reserve(real.size() + synth.size());
  pooled.insert(pooled.end(), real.begin(), real.end());
  pooled.insert(pooled.end(), synth.begin(), synth.end());

  const GespiStreams streams = gespi_streams(cfg.seed);
  PartialAction base = proc.run(real, cfg.alpha, streams.real);
  PartialAction guard = proc.run(real, cfg.alpha + cfg.epsilon, streams.real);
  PartialAction pool = proc.run(std::span<const Record>(pooled), cfg.alpha,
                                streams.pooled);
  return combine<PartialAction>(cfg.variant, std::move(base), std::move(pool),
                                std::move(guard));
}

template <class Record>
GespiOutput<PartialAction> gespi_one_sided(const BaseProcedure<Record>& proc,
                                           std::span<const Record> real,
                                           std::span<const Record> synth,
                                           GespiConfig cfg) {
  cfg.variant = GuardrailVariant::OneSided;
  return gespi(proc, real, synth, cfg);
}

template <class Record>
GespiOutput<PartialAction> gespi_two_sided(const BaseProcedure<Record>& proc,
                                           std::span<const Record> real,
                                           std::span<const Record> synth,
                                           GespiConfig cfg) {
  cfg.variant = GuardrailVariant::TwoSided;
  return gespi(proc, real, synth, cfg);
}

/// GESPI conformal threshold: the test label is covered iff its score is at
/// most the returned threshold.
ThresholdAction gespi_conformal_threshold(std::span<const double> real_scores,
                                          std::span<const double> synth_scores,
                                          const GespiConfig& cfg);

/// S_real ∪ (S_pooled ∩ S_guard).
RejectionSet gespi_rejection_set(const RejectionSet& real,
                                 const RejectionSet& pooled,
                                 const RejectionSet& guard);

}  // namespace gespi
