#ifndef ABSTAIN_SAFE_HPP
#define ABSTAIN_SAFE_HPP

#include <optional>
#include <string>
#include <vector>

#include "abstain/core.hpp"
#include "abstain/learner.hpp"
#include "abstain/value.hpp"

namespace abstain {

struct SpiConfig {
  std::vector<double> bonus_grid{0.0, 0.01, 0.05, 0.10, 0.20};
  double delta = 0.05;
  double train_fraction = 0.5;
  Estimator estimator = Estimator::ipw;
  LearnerConfig learner;
  /// Seeds the train/test split.
  std::uint64_t seed = 0;

  void validate() const;
};

struct LcbRecord {
  std::optional<double> bonus;  // unset for single-candidate methods
  double lcb = 0.0;
};

struct SpiOutcome {
  bool accepted = false;
  BinaryPolicy policy;
  std::optional<double> accepted_bonus;
  std::vector<LcbRecord> lcb_trace;
  /// Abstaining policy behind the accepted candidate, when it came from the learner.
  std::optional<AbstainingPolicy> source;
};

/// Baseline where the abstaining policy abstains, its own label elsewhere.
BinaryPolicy impute_baseline(const AbstainingPolicy& abstaining, const BinaryPolicy& baseline);

/// Seeded shuffle; the first floor(train_fraction * n) samples train, the rest test.
std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double train_fraction,
                                             std::uint64_t seed);

/// Safe policy learning with abstention over an ascending bonus grid with a Bonferroni-
/// corrected one-sided LCB; returns the first candidate whose LCB is positive.
SpiOutcome safe_policy_improvement(const Dataset& data, const PolicyClass& policies,
                                   const BinaryPolicy& baseline, const SpiConfig& config,
                                   const NuisanceModel* nuisance = nullptr);

struct SplitOptions {
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
};

/// EWM on the train split, tested once against the baseline at level delta (k = 1).
SpiOutcome safe_ewm(const Dataset& data, const PolicyClass& policies, const BinaryPolicy& baseline,
                    double delta, Estimator estimator, const NuisanceModel* nuisance = nullptr,
                    const SplitOptions& split = {});

enum class HcpiVariant { t_test, clipped_ci };

struct HcpiOptions {
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
  /// Cap on per-unit importance-weighted returns for the clipped variant; 1/kappa when unset.
  std::optional<double> clip_cap;
};

/// Student-t lower bound on the mean difference.
double hcpi_t_bound(std::span<const double> differences, double delta);
/// Empirical-Bernstein lower bound on the mean of values confined to an interval of width
/// `range`.
double empirical_bernstein_bound(std::span<const double> values, double delta, double range);

/// High-confidence policy improvement baselines on IPW returns. The candidate maximizes the
/// variant's bound predicted on the train split (at the test split's size).
SpiOutcome hcpi(const Dataset& data, const PolicyClass& policies, const BinaryPolicy& baseline,
                double delta, HcpiVariant variant, const HcpiOptions& options = {});

}  // namespace abstain

#endif  // ABSTAIN_SAFE_HPP
