#include "abstain/safe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "abstain/rng.hpp"

namespace abstain {

void SpiConfig::validate() const {
  if (bonus_grid.empty()) throw InputError("bonus grid must be nonempty");
  for (std::size_t i = 0; i < bonus_grid.size(); ++i) {
    if (!(bonus_grid[i] >= 0.0)) throw InputError("bonus grid values must be >= 0");
    if (i > 0 && !(bonus_grid[i] > bonus_grid[i - 1]))
      throw InputError("bonus grid must be strictly increasing");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InputError("train_fraction must lie in (0,1)");
  learner.validate();
}

BinaryPolicy impute_baseline(const AbstainingPolicy& abstaining, const BinaryPolicy& baseline) {
  return BinaryPolicy(SplicePolicy{std::make_shared<const BinaryPolicy>(abstaining.base()),
                                   std::make_shared<const BinaryPolicy>(abstaining.member()),
                                   std::make_shared<const BinaryPolicy>(baseline)});
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double train_fraction,
                                             std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InputError("train_fraction must lie in (0,1)");
  CounterRng rng(seed, 0, "split-train-test");
  const auto idx = shuffled_indices(data.size(), rng);
  const auto n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(data.size())));
  if (n_train < 1 || n_train >= data.size())
    throw InputError("train/test split leaves an empty side");
  return {data.subset(std::span(idx).first(n_train)),
          data.subset(std::span(idx).subspan(n_train))};
}

SpiOutcome safe_policy_improvement(const Dataset& data, const PolicyClass& policies,
                                   const BinaryPolicy& baseline, const SpiConfig& config,
                                   const NuisanceModel* nuisance) {
  config.validate();
  const auto [train, test] = split_train_test(data, config.train_fraction, config.seed);
  if (train.size() < 4) throw InputError("safe_policy_improvement: train split too small");
  if (test.size() < 2) throw InputError("safe_policy_improvement: test split too small");
  const int k = static_cast<int>(config.bonus_grid.size());

  SpiOutcome out{false, baseline, std::nullopt, {}, std::nullopt};
  for (double bonus : config.bonus_grid) {
    LearnerConfig learner = config.learner;
    learner.bonus = bonus;
    learner.dr_mode = config.estimator == Estimator::dr;
    const auto fit = learn_abstaining(train, policies, learner, nuisance);
    auto candidate = impute_baseline(fit.result, baseline);
    const double lcb =
        lcb_difference(candidate, baseline, test, config.delta, k, config.estimator, nuisance);
    out.lcb_trace.push_back({bonus, lcb});
    if (lcb > 0.0) {
      out.accepted = true;
      out.policy = std::move(candidate);
      out.accepted_bonus = bonus;
      out.source = fit.result;
      return out;
    }
  }
  return out;
}

SpiOutcome safe_ewm(const Dataset& data, const PolicyClass& policies, const BinaryPolicy& baseline,
                    double delta, Estimator estimator, const NuisanceModel* nuisance,
                    const SplitOptions& split) {
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
  const auto [train, test] = split_train_test(data, split.train_fraction, split.seed);
  if (test.size() < 2) throw InputError("safe_ewm: test split too small");
  auto candidate = ewm(train, policies, estimator, nuisance);
  const double lcb = lcb_difference(candidate, baseline, test, delta, 1, estimator, nuisance);
  SpiOutcome out{false, baseline, std::nullopt, {{std::nullopt, lcb}}, std::nullopt};
  if (lcb > 0.0) {
    out.accepted = true;
    out.policy = std::move(candidate);
  }
  return out;
}

double hcpi_t_bound(std::span<const double> differences, double delta) {
  return t_lcb_from_differences(differences, delta);
}

double empirical_bernstein_bound(std::span<const double> values, double delta, double range) {
  if (values.size() < 2) throw InputError("empirical Bernstein bound needs n >= 2");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
  if (!(range > 0.0)) throw InputError("range must be positive");
  const auto [mean, sd] = mean_and_sd(values);
  const auto n = static_cast<double>(values.size());
  const double log_term = std::log(2.0 / delta);
  return mean - std::sqrt(2.0 * sd * sd * log_term / n) - 7.0 * range * log_term / (3.0 * (n - 1.0));
}

namespace {

/// Bound of the variant on the differences of (clipped) returns, as if computed on a sample
/// of `n_eval` units with the same mean and spread.
double variant_bound(std::span<const double> differences, double delta, HcpiVariant variant,
                     double cap, std::size_t n_eval) {
  const auto [mean, sd] = mean_and_sd(differences);
  const auto n = static_cast<double>(n_eval);
  if (variant == HcpiVariant::t_test) {
    if (sd == 0.0) return mean;
    return mean - student_t_quantile(1.0 - delta, n - 1.0) * sd / std::sqrt(n);
  }
  const double log_term = std::log(2.0 / delta);
  return mean - std::sqrt(2.0 * sd * sd * log_term / n) -
         7.0 * (4.0 * cap) * log_term / (3.0 * (n - 1.0));
}

std::vector<double> clipped_differences(const ArmScores& scores,
                                        std::span<const std::uint8_t> candidate,
                                        std::span<const std::uint8_t> baseline,
                                        std::optional<double> cap) {
  const auto a = unit_scores(scores, candidate);
  const auto b = unit_scores(scores, baseline);
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ra = cap ? std::clamp(a[i], -*cap, *cap) : a[i];
    const double rb = cap ? std::clamp(b[i], -*cap, *cap) : b[i];
    diff[i] = ra - rb;
  }
  return diff;
}

}  // namespace

SpiOutcome hcpi(const Dataset& data, const PolicyClass& policies, const BinaryPolicy& baseline,
                double delta, HcpiVariant variant, const HcpiOptions& options) {
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
  const double cap = options.clip_cap.value_or(1.0 / data.kappa());
  if (!(cap > 0.0)) throw InputError("clip cap must be positive");
  const auto [train, test] = split_train_test(data, options.train_fraction, options.seed);
  if (train.size() < 2 || test.size() < 2) throw InputError("hcpi: split too small");
  const std::optional<double> clip =
      variant == HcpiVariant::clipped_ci ? std::optional<double>(cap) : std::nullopt;

  const auto train_scores = ipw_arm_scores(train);
  const auto base_train = label_samples(baseline, train);
  std::size_t best = 0;
  double best_bound = -std::numeric_limits<double>::infinity();
  for (auto k : policies.distinct_on(train)) {
    const auto labels = label_samples(policies[k], train);
    const auto diff = clipped_differences(train_scores, labels, base_train, clip);
    const double b = variant_bound(diff, delta, variant, cap, test.size());
    if (b > best_bound) {
      best_bound = b;
      best = k;
    }
  }

  const BinaryPolicy& candidate = policies[best];
  const auto test_scores = ipw_arm_scores(test);
  const auto diff = clipped_differences(test_scores, label_samples(candidate, test),
                                        label_samples(baseline, test), clip);
  const double bound = variant == HcpiVariant::t_test
                           ? hcpi_t_bound(diff, delta)
                           : empirical_bernstein_bound(diff, delta, 4.0 * cap);
  SpiOutcome out{false, baseline, std::nullopt, {{std::nullopt, bound}}, std::nullopt};
  if (bound > 0.0) {
    out.accepted = true;
    out.policy = candidate;
  }
  return out;
}

}  // namespace abstain
