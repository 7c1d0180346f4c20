#ifndef ABSTAIN_LEARNER_HPP
#define ABSTAIN_LEARNER_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "abstain/core.hpp"
#include "abstain/value.hpp"

namespace abstain {

struct LearnerConfig {
  double bonus = 0.05;
  double delta = 0.05;
  /// Falls back to the policy class's declared VC dimension when unset.
  std::optional<int> vc_dim;
  /// The constant c in the near-optimal radius (c/kappa)(alpha^2 + alpha sqrt(m)).
  double radius_constant = 1.0;
  bool dr_mode = false;
  /// Upper bound on the nuisance product error; falls back to the nuisance model's own bound.
  std::optional<double> err_dr;
  std::uint64_t seed = 0;

  void validate() const;
};

/// sqrt((d log(n/d) + log(1/delta)) / n).
double selection_alpha(std::size_t n, int vc_dim, double delta);

struct AbstentionDiagnostics {
  double alpha = 0.0;  // alpha_DR in DR mode
  std::size_t near_optimal_size = 0;
  std::size_t candidate_count = 0;  // distinct projected policies on the second half
  double abstention_fraction = 0.0;  // on the held-out half
  double first_stage_value = 0.0;
  double second_stage_value = 0.0;
};

struct AbstentionFit {
  BinaryPolicy pi_hat;
  std::vector<BinaryPolicy> near_optimal;
  AbstainingPolicy result;
  AbstentionDiagnostics diagnostics;
};

/// Seeded Fisher-Yates shuffle, then contiguous halves; the first half gets ceil(n/2).
std::pair<Dataset, Dataset> split_halves(const Dataset& data, std::uint64_t seed);

/// Empirical welfare maximizer; ties go to the lowest class index.
BinaryPolicy ewm(const Dataset& data, const PolicyClass& policies, Estimator objective,
                 const NuisanceModel* nuisance = nullptr);
std::size_t ewm_index(const Dataset& data, const PolicyClass& policies, Estimator objective,
                      const NuisanceModel* nuisance = nullptr);

/// Class members whose empirical value is within the selection radius of pi_hat's, in class
/// order with duplicate labelings on `data` removed. IPW mode measures distance with
/// score_distance and alpha; DR mode with disagreement_mass and alpha + Err_DR.
std::vector<BinaryPolicy> near_optimal_set(const Dataset& data, const PolicyClass& policies,
                                           const BinaryPolicy& pi_hat, const LearnerConfig& config,
                                           const NuisanceModel* nuisance = nullptr);

/// Two-stage abstention learner on a random half split of `data`.
AbstentionFit learn_abstaining(const Dataset& data, const PolicyClass& policies,
                               const LearnerConfig& config,
                               const NuisanceModel* nuisance = nullptr);

/// Same learner on a caller-supplied split: first stage on `first`, second on `second`.
AbstentionFit learn_abstaining_on_split(const Dataset& first, const Dataset& second,
                                        const PolicyClass& policies, const LearnerConfig& config,
                                        const NuisanceModel* nuisance = nullptr);

}  // namespace abstain

#endif  // ABSTAIN_LEARNER_HPP
