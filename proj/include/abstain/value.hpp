#ifndef ABSTAIN_VALUE_HPP
#define ABSTAIN_VALUE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "abstain/core.hpp"

namespace abstain {

enum class Estimator { ipw, dr };

/// Empirical value with the per-sample contributions it averages.
struct ValueEstimate {
  double value = 0.0;
  std::size_t n = 0;
  std::vector<double> per_unit;
};

/// Per-sample score of each arm: the value of a policy is the mean over samples of
/// treat[i] or control[i] depending on its label, and (treat[i]+control[i])/2 + bonus on
/// abstention. IPW scores are y*d/p and y*(1-d)/(1-p); DR scores are pseudo-outcomes.
struct ArmScores {
  std::vector<double> treat;
  std::vector<double> control;

  std::size_t size() const { return treat.size(); }
};

ArmScores ipw_arm_scores(const Dataset& data);
ArmScores dr_arm_scores(const Dataset& data, const NuisanceModel& nuisance);
/// Dispatches on the estimator; DR requires a nuisance model.
ArmScores arm_scores(const Dataset& data, Estimator estimator, const NuisanceModel* nuisance);

/// Per-unit scores for labels in {0, 1, 2 = abstain}.
std::vector<double> unit_scores(const ArmScores& scores, std::span<const std::uint8_t> labels,
                                double bonus = 0.0);
/// Mean of unit_scores without materializing them.
double mean_score(const ArmScores& scores, std::span<const std::uint8_t> labels,
                  double bonus = 0.0);

/// IPW value V_n of a binary policy. Requires known propensities.
ValueEstimate ipw_value(const BinaryPolicy& policy, const Dataset& data);

/// kappa-normalized IPW contribution f_pi of one sample; in [0,1] under bounded outcomes
/// and valid overlap.
double normalized_score(const BinaryPolicy& policy, const Sample& sample, double kappa);

/// Mean absolute difference of normalized scores, E_n|f_p1 - f_p2|.
double score_distance(const BinaryPolicy& p1, const BinaryPolicy& p2, const Dataset& data,
                      double kappa);

/// Abstaining IPW value V_n^(p).
ValueEstimate ipw_value_abstain(const AbstainingPolicy& policy, const Dataset& data, double bonus);

/// Pseudo-outcome for `arm`: g(arm,x) + 1{d=arm} (y - g(arm,x)) / q, q = p(x) or 1-p(x).
double dr_pseudo_outcome(const NuisanceModel& nuisance, const Sample& sample, int arm);

ValueEstimate dr_value(const BinaryPolicy& policy, const Dataset& data,
                       const NuisanceModel& nuisance);
ValueEstimate dr_value_abstain(const AbstainingPolicy& policy, const Dataset& data,
                               const NuisanceModel& nuisance, double bonus);

/// Standard-normal quantile Phi^{-1}(prob), prob in (0,1).
double normal_quantile(double prob);
/// Student-t quantile with `dof` degrees of freedom.
double student_t_quantile(double prob, double dof);

/// One-sided (1-delta) lower bound on the mean of `differences` with Bonferroni factor k:
/// mean - z_{1-delta/k} * sd / sqrt(n). A zero standard deviation gives the mean itself.
double lcb_from_differences(std::span<const double> differences, double delta, int k);

/// Same with a Student-t quantile on n-1 degrees of freedom.
double t_lcb_from_differences(std::span<const double> differences, double delta);

/// Per-unit score differences Gamma_i(candidate) - Gamma_i(baseline).
std::vector<double> score_differences(const BinaryPolicy& candidate, const BinaryPolicy& baseline,
                                      const Dataset& data, Estimator estimator,
                                      const NuisanceModel* nuisance);

double lcb_difference(const BinaryPolicy& candidate, const BinaryPolicy& baseline,
                      const Dataset& data, double delta, int k, Estimator estimator,
                      const NuisanceModel* nuisance = nullptr);

struct MeanAndDeviation {
  double mean = 0.0;
  double sd = 0.0;  // Bessel-corrected
};
MeanAndDeviation mean_and_sd(std::span<const double> values);

}  // namespace abstain

#endif  // ABSTAIN_VALUE_HPP
