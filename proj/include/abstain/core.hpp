#ifndef ABSTAIN_CORE_HPP
#define ABSTAIN_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace abstain {

// Error taxonomy. The CLI maps InputError to exit code 2 and IoError to 3.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class PreconditionError : public InputError {
 public:
  using InputError::InputError;
};

class FittingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CapacityError : public InputError {
 public:
  using InputError::InputError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Covariates = std::span<const double>;

/// Output of a (possibly abstaining) policy.
enum class Action : std::uint8_t { control = 0, treat = 1, abstain = 2 };

inline int to_int(Action a) { return static_cast<int>(a); }
std::string to_string(Action a);

/// One logged observation (x, d, y) with an optional known propensity P(D=1|X=x).
struct Sample {
  std::vector<double> x;
  int d = 0;
  double y = 0.0;
  std::optional<double> propensity;
};

/// Immutable collection of samples sharing one covariate dimension and overlap bound.
///
/// Each dataset carries an identity tag. Subsets derive a fresh tag from the parent's,
/// which lets nuisance fitting record where it was trained.
class Dataset {
 public:
  Dataset(std::vector<Sample> samples, double kappa, std::size_t dim,
          bool bounded_outcomes = false);
  Dataset(std::vector<Sample> samples, double kappa, std::size_t dim, bool bounded_outcomes,
          std::uint64_t id);

  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  double kappa() const { return kappa_; }
  std::size_t dim() const { return dim_; }
  bool bounded_outcomes() const { return bounded_outcomes_; }
  std::uint64_t id() const { return id_; }

  bool has_propensities() const;

  /// Samples at the given positions, in that order.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Concatenation of two datasets with matching kappa and dimension.
  Dataset concat(const Dataset& other) const;

 private:
  std::vector<Sample> samples_;
  double kappa_;
  std::size_t dim_;
  bool bounded_outcomes_;
  std::uint64_t id_;
};

class BinaryPolicy;

/// decide 1 iff x[feature] > threshold (or <= threshold when !greater)
struct AxisThreshold {
  std::size_t feature = 0;
  double threshold = 0.0;
  bool greater = true;
};

/// decide 1 iff w.x + b > 0
struct LinearThreshold {
  std::vector<double> weights;
  double intercept = 0.0;
};

/// Explicit labels on enumerated covariate points. Points outside the table fall back to
/// `fallback` when set, else to `default_label`.
struct TablePolicy {
  std::map<std::vector<double>, int> labels;
  int default_label = 0;
  std::shared_ptr<const BinaryPolicy> fallback;
};

struct ConstantPolicy {
  int label = 0;
};

/// In-process decision function, e.g. the sign of a CATE oracle. Serializes by name only.
struct CallablePolicy {
  std::shared_ptr<const std::function<int(std::span<const double>)>> fn;
  std::string name;
};

/// base(x) where member(x) == base(x), fill(x) elsewhere. Represents an abstaining policy
/// whose abstentions were resolved by another binary policy.
struct SplicePolicy {
  std::shared_ptr<const BinaryPolicy> base;
  std::shared_ptr<const BinaryPolicy> member;
  std::shared_ptr<const BinaryPolicy> fill;
};

class BinaryPolicy {
 public:
  using Rule = std::variant<AxisThreshold, LinearThreshold, TablePolicy, ConstantPolicy,
                            SplicePolicy, CallablePolicy>;

  BinaryPolicy(Rule rule);

  static BinaryPolicy constant(int label);
  static BinaryPolicy axis(std::size_t feature, double threshold, bool greater = true);
  static BinaryPolicy linear(std::vector<double> weights, double intercept);

  /// 0 or 1. Throws InputError on a dimension mismatch.
  int decide(Covariates x) const;
  Action operator()(Covariates x) const { return static_cast<Action>(decide(x)); }

  const Rule& rule() const { return rule_; }
  std::string kind() const;

 private:
  Rule rule_;
};

bool operator==(const BinaryPolicy& a, const BinaryPolicy& b);

/// A binary member projected against a reference policy: abstains exactly on their
/// disagreement set, otherwise returns the common label.
class AbstainingPolicy {
 public:
  AbstainingPolicy(BinaryPolicy base, BinaryPolicy member);

  Action operator()(Covariates x) const;
  bool abstains(Covariates x) const;

  const BinaryPolicy& base() const { return base_; }
  const BinaryPolicy& member() const { return member_; }

 private:
  BinaryPolicy base_;
  BinaryPolicy member_;
};

Action evaluate_policy(const BinaryPolicy& policy, Covariates x);
Action evaluate_policy(const AbstainingPolicy& policy, Covariates x);

/// Labels (0/1) of a binary policy on every sample.
std::vector<std::uint8_t> label_samples(const BinaryPolicy& policy, const Dataset& data);
/// Actions (0/1/2 = abstain) of an abstaining policy on every sample.
std::vector<std::uint8_t> label_samples(const AbstainingPolicy& policy, const Dataset& data);

/// Fraction of samples on which the two policies disagree.
double disagreement_mass(const BinaryPolicy& p1, const BinaryPolicy& p2, const Dataset& data);

/// Finite ordered class of binary policies with a declared VC dimension.
class PolicyClass {
 public:
  PolicyClass(std::vector<BinaryPolicy> policies, int vc_dim);

  const std::vector<BinaryPolicy>& policies() const { return policies_; }
  const BinaryPolicy& operator[](std::size_t i) const { return policies_[i]; }
  std::size_t size() const { return policies_.size(); }
  int vc_dim() const { return vc_dim_; }

  /// Indices of the first policy of every distinct labeling on `data`, in class order.
  std::vector<std::size_t> distinct_on(const Dataset& data) const;

 private:
  std::vector<BinaryPolicy> policies_;
  int vc_dim_;
};

/// Axis thresholds on the listed features, each threshold in both directions.
PolicyClass axis_threshold_class(std::span<const std::size_t> features,
                                 std::span<const double> thresholds, int vc_dim = 2);

/// Linear thresholds on a pair of features: w_a*x_a + w_b*x_b + b > 0 over the weight grid
/// (both weights zero skipped) and intercept grid.
PolicyClass linear_threshold_class(std::size_t dim, std::size_t feature_a, std::size_t feature_b,
                                   std::span<const double> weight_grid,
                                   std::span<const double> intercept_grid, int vc_dim = 3);

/// Concatenation; declared VC dimension is the caller's.
PolicyClass merge_classes(const PolicyClass& a, const PolicyClass& b, int vc_dim);

/// Evenly spaced grid of `count` points from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t count);

/// Nuisance pair (g_hat, p_hat) for doubly-robust pseudo-outcomes.
class NuisanceModel {
 public:
  using Regression = std::function<double(int, Covariates)>;
  using Propensity = std::function<double(Covariates)>;

  NuisanceModel(Regression g_hat, Propensity p_hat, double kappa,
                std::optional<double> err_dr_bound = std::nullopt,
                std::optional<std::uint64_t> fitted_on = std::nullopt);

  double g(int arm, Covariates x) const { return g_hat_(arm, x); }
  /// Propensity estimate clipped to [kappa, 1 - kappa].
  double p(Covariates x) const;

  double kappa() const { return kappa_; }
  std::optional<double> err_dr_bound() const { return err_dr_bound_; }
  std::optional<std::uint64_t> fitted_on() const { return fitted_on_; }

  NuisanceModel with_err_dr(double err) const;

 private:
  Regression g_hat_;
  Propensity p_hat_;
  double kappa_;
  std::optional<double> err_dr_bound_;
  std::optional<std::uint64_t> fitted_on_;
};

}  // namespace abstain

#endif  // ABSTAIN_CORE_HPP
