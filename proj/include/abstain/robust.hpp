#ifndef ABSTAIN_ROBUST_HPP
#define ABSTAIN_ROBUST_HPP

#include <functional>
#include <vector>

#include "abstain/core.hpp"
#include "abstain/dgp.hpp"

namespace abstain {

/// Output of a randomizing policy; `half` is a fair coin between the arms.
enum class RandomizedAction : std::uint8_t { control = 0, treat = 1, half = 2 };

class RandomizingPolicy {
 public:
  using Rule = std::function<RandomizedAction(Covariates)>;

  explicit RandomizingPolicy(Rule rule);
  /// Commits wherever the binary policy does.
  static RandomizingPolicy from_binary(const BinaryPolicy& policy);
  /// Randomizes exactly where the abstaining policy abstains.
  static RandomizingPolicy from_abstaining(const AbstainingPolicy& policy);

  RandomizedAction operator()(Covariates x) const { return rule_(x); }

 private:
  Rule rule_;
};

/// Conditional means mu0, mu1 on a fixed set of covariate points. The points may be left
/// empty when only the action-span overloads are used.
struct ConditionalMeans {
  std::vector<std::vector<double>> points;
  std::vector<double> mu0;
  std::vector<double> mu1;

  static ConditionalMeans from_truth(const TruthSample& truth);
  static ConditionalMeans from_grid(const Oracle& oracle, std::vector<std::vector<double>> points);
  /// Plug-in g_hat at the covariates of `data`.
  static ConditionalMeans plug_in(const Dataset& data, const NuisanceModel& nuisance);

  std::size_t size() const { return mu0.size(); }
};

/// Closed-form minimum of V(policy) over the W1 ball of radius `shift_radius`: committing
/// costs the full radius, randomizing half of it.
double worst_case_value(const RandomizingPolicy& policy, const ConditionalMeans& means,
                        double shift_radius);
double worst_case_value(std::span<const RandomizedAction> actions, const ConditionalMeans& means,
                        double shift_radius);

struct ShiftCheck {
  double lhs = 0.0;  // worst-case value
  double rhs = 0.0;  // V^(r/2) of the abstaining conversion, minus r
  double gap = 0.0;
};

ShiftCheck check_shift_equivalence(const RandomizingPolicy& policy, const ConditionalMeans& means,
                                   double shift_radius);
ShiftCheck check_shift_equivalence(std::span<const RandomizedAction> actions,
                                   const ConditionalMeans& means, double shift_radius);

}  // namespace abstain

#endif  // ABSTAIN_ROBUST_HPP
