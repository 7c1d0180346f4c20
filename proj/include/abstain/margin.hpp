#ifndef ABSTAIN_MARGIN_HPP
#define ABSTAIN_MARGIN_HPP

#include <functional>
#include <optional>
#include <vector>

#include "abstain/core.hpp"
#include "abstain/dgp.hpp"
#include "abstain/learner.hpp"

namespace abstain {

enum class MarginMode { finite_d, cate_oracle };

struct MarginConfig {
  double margin = 0.2;  // h
  MarginMode mode = MarginMode::finite_d;
  std::size_t finite_d_cap = 12;
  LearnerConfig learner;

  void validate() const;
};

using CateOracle = std::function<double(Covariates)>;

struct MarginFit {
  BinaryPolicy policy;  // pi_final
  AbstentionFit abstention;
  /// Third-split samples inside the abstention region.
  std::optional<Dataset> refine_data;
  /// FiniteD: distinct refinement points and the chosen labels, in enumeration order
  /// (bit j of the labeling index is the label of point j).
  std::vector<std::vector<double>> refine_points;
  std::vector<int> refine_labels;
  double refine_value = 0.0;
  std::size_t labelings_evaluated = 0;
};

/// Three-way split: abstain with bonus h/2 on the first two thirds, then resolve the
/// abstention region on the last third by exhaustive labeling (FiniteD) or by the sign of
/// the CATE oracle.
MarginFit margin_learn(const Dataset& data, const PolicyClass& policies,
                       const MarginConfig& config, const CateOracle& cate_oracle = {},
                       const NuisanceModel* nuisance = nullptr);

/// Empirical conditional value on `data` of assigning labels[j] to every sample equal to
/// points[j]. Shared by the enumeration and its tests.
double labeling_value(const ArmScores& scores, std::span<const std::size_t> point_of_sample,
                      std::uint64_t labeling);

/// tau_o(x) + scale * n^(-beta) * z(x), with z(x) a standard normal fixed by hashing the
/// coordinates and seed, so each replication sees one deterministic function.
CateOracle noisy_cate_oracle(const Oracle& truth, double scale, std::size_t n, double beta,
                             std::uint64_t seed);

}  // namespace abstain

#endif  // ABSTAIN_MARGIN_HPP
