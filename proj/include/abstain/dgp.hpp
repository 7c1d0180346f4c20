#ifndef ABSTAIN_DGP_HPP
#define ABSTAIN_DGP_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "abstain/core.hpp"
#include "abstain/rng.hpp"

namespace abstain {

enum class DgpFamily { spi, abstention };
enum class PropensityKind { constant, logistic };
/// Abstention-family CATE shapes. hard_margin has |tau| = margin everywhere.
enum class RewardRegime { linear, nonlinear, complex, hard_margin };

std::string to_string(DgpFamily f);
std::string to_string(PropensityKind k);
std::string to_string(RewardRegime r);
DgpFamily parse_family(const std::string& s);
PropensityKind parse_propensity_kind(const std::string& s);
RewardRegime parse_regime(const std::string& s);

/// Half-width of the zero-CATE plateau of the complex regime: P(|Z| < w) = 1/2.
inline constexpr double kPlateauHalfWidth = 0.6744897501960817;

struct DgpSpec {
  DgpFamily family = DgpFamily::spi;
  std::size_t dim = 5;
  double noise_sigma = 0.3;
  PropensityKind propensity_kind = PropensityKind::constant;
  RewardRegime reward_regime = RewardRegime::complex;
  /// spi family: the baseline policy's decision boundary is x0 + x1 > 1 + baseline_gap.
  double baseline_gap = 0.0;
  std::uint64_t seed = 0;
  double kappa = 0.1;
  /// Abstention family: when > 0, every covariate is snapped to this many evenly spaced
  /// points on [-2, 2], giving a finite covariate space.
  std::size_t support_points = 0;
  /// |tau| for the hard_margin regime.
  double margin = 0.3;

  void validate() const;
};

/// Ground truth of a DGP: exact CATE, conditional means, propensity, and fresh draws.
class Oracle {
 public:
  explicit Oracle(DgpSpec spec);

  const DgpSpec& spec() const { return spec_; }

  double tau(Covariates x) const;
  /// Exact E[Y(arm) | X = x], accounting for outcome clipping in the abstention family.
  double mean_outcome(int arm, Covariates x) const;
  double propensity(Covariates x) const;
  /// 1{tau(x) > 0}.
  int bayes_decision(Covariates x) const { return tau(x) > 0.0 ? 1 : 0; }

  std::vector<double> draw_covariates(CounterRng& rng) const;
  /// One draw of the potential outcome Y(arm) at x.
  double draw_outcome(int arm, Covariates x, CounterRng& rng) const;

  /// Exact nuisances; Err_DR = 0.
  NuisanceModel nuisance() const;

 private:
  double raw_mean(int arm, Covariates x) const;
  DgpSpec spec_;
};

struct Generated {
  Dataset data;
  Oracle oracle;
};

/// n i.i.d. samples with recorded propensities. Replication r draws from independent
/// streams keyed by (spec.seed, r).
Generated generate(const DgpSpec& spec, std::size_t n, std::uint64_t replication = 0);

/// spi family baseline: 1{x0 + x1 > 1 + baseline_gap}. Gap 0 is the optimal policy.
BinaryPolicy spi_baseline(const DgpSpec& spec);
/// spi family optimal policy 1{x0 + x1 > 1}.
BinaryPolicy spi_optimal(const DgpSpec& spec);

/// Default enumerated classes: spi gets linear thresholds on (x0, x1) plus axis thresholds
/// on every feature; abstention gets axis thresholds on the first two features.
PolicyClass default_policy_class(const DgpSpec& spec);

struct MonteCarloValue {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Fresh-draw Monte-Carlo value with potential-outcome draws.
MonteCarloValue true_value(const BinaryPolicy& policy, const Oracle& oracle, std::size_t mc_n,
                           std::uint64_t stream = 0);
/// Abstaining value V^(p): abstentions earn the exact (mu0 + mu1)/2 + bonus.
MonteCarloValue true_value(const AbstainingPolicy& policy, const Oracle& oracle, double bonus,
                           std::size_t mc_n, std::uint64_t stream = 0);

/// Fixed covariate draws with exact conditional means, for common-random-number comparisons
/// of many policies.
class TruthSample {
 public:
  TruthSample(const Oracle& oracle, std::size_t size, std::uint64_t stream = 0);

  std::size_t size() const { return points_.size(); }
  const std::vector<std::vector<double>>& points() const { return points_; }
  const std::vector<double>& mu0() const { return mu0_; }
  const std::vector<double>& mu1() const { return mu1_; }

  double value(const BinaryPolicy& policy) const;
  double value(const AbstainingPolicy& policy, double bonus) const;
  double value(std::span<const std::uint8_t> labels, double bonus = 0.0) const;
  std::vector<std::uint8_t> labels(const BinaryPolicy& policy) const;
  std::vector<std::uint8_t> labels(const AbstainingPolicy& policy) const;
  /// Fraction of points where the labels are `abstain`.
  static double abstention_rate(std::span<const std::uint8_t> labels);

 private:
  std::vector<std::vector<double>> points_;
  std::vector<double> mu0_;
  std::vector<double> mu1_;
};

enum class NuisanceMethod { histogram, logistic_irls, knn };
NuisanceMethod parse_nuisance_method(const std::string& s);

struct NuisanceParams {
  std::size_t bins = 4;        // histogram bins per feature
  std::size_t max_features = 2;  // histogram uses the first few features
  std::size_t k = 25;          // knn neighbours
  int max_iter = 50;           // IRLS iterations
};

/// Fits g_hat per arm and p_hat on `data`; p_hat is clipped to [kappa, 1 - kappa]. The model
/// records data.id() so learners can reject it on the same sample.
NuisanceModel fit_nuisance(const Dataset& data, NuisanceMethod method,
                           const NuisanceParams& params = {});

/// Monte-Carlo product error sqrt(E[(p_hat - p)^2 sum_d (g_hat(d) - g(d))^2]).
double estimate_err_dr(const NuisanceModel& nuisance, const Oracle& oracle, std::size_t mc_n,
                       std::uint64_t stream = 0);

/// E[clip(m + sigma Z, 0, 1)] for standard normal Z.
double clipped_normal_mean(double m, double sigma);

}  // namespace abstain

#endif  // ABSTAIN_DGP_HPP
