#include "abstain/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace abstain {

std::string to_string(DgpFamily f) { return f == DgpFamily::spi ? "spi" : "abstention"; }

std::string to_string(PropensityKind k) {
  return k == PropensityKind::constant ? "constant" : "logistic";
}

std::string to_string(RewardRegime r) {
  switch (r) {
    case RewardRegime::linear:
      return "linear";
    case RewardRegime::nonlinear:
      return "nonlinear";
    case RewardRegime::complex:
      return "complex";
    case RewardRegime::hard_margin:
      return "hard_margin";
  }
  return "?";
}

DgpFamily parse_family(const std::string& s) {
  if (s == "spi") return DgpFamily::spi;
  if (s == "abstention") return DgpFamily::abstention;
  throw InputError("unknown DGP family '" + s + "'");
}

PropensityKind parse_propensity_kind(const std::string& s) {
  if (s == "constant") return PropensityKind::constant;
  if (s == "logistic") return PropensityKind::logistic;
  throw InputError("unknown propensity kind '" + s + "'");
}

RewardRegime parse_regime(const std::string& s) {
  if (s == "linear") return RewardRegime::linear;
  if (s == "nonlinear") return RewardRegime::nonlinear;
  if (s == "complex") return RewardRegime::complex;
  if (s == "hard_margin") return RewardRegime::hard_margin;
  throw InputError("unknown reward regime '" + s + "'");
}

void DgpSpec::validate() const {
  if (family == DgpFamily::spi && dim < 3) throw InputError("spi family needs dim >= 3");
  if (dim < 1) throw InputError("dim must be >= 1");
  if (!(noise_sigma >= 0.0)) throw InputError("noise_sigma must be >= 0");
  if (!(kappa > 0.0 && kappa <= 0.1))
    throw InputError("synthetic propensities lie in [0.1, 0.9]; kappa must be in (0, 0.1]");
  if (!(margin > 0.0 && margin <= 0.5)) throw InputError("margin must lie in (0, 0.5]");
  if (support_points == 1) throw InputError("support_points must be 0 or >= 2");
}

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

double clipped_normal_mean(double m, double sigma) {
  if (sigma == 0.0) return std::clamp(m, 0.0, 1.0);
  const double a = -m / sigma;
  const double b = (1.0 - m) / sigma;
  const double Fa = std_normal_cdf(a);
  const double Fb = std_normal_cdf(b);
  return (1.0 - Fb) + m * (Fb - Fa) + sigma * (std_normal_pdf(a) - std_normal_pdf(b));
}

Oracle::Oracle(DgpSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

double Oracle::tau(Covariates x) const {
  if (spec_.family == DgpFamily::spi) return 2.0 * (x[0] + x[1] - 1.0);
  const double x0 = x[0];
  const double x1 = x.size() > 1 ? x[1] : 0.0;
  switch (spec_.reward_regime) {
    case RewardRegime::linear:
      return std::clamp(0.25 * x0 + 0.05 * x1, -0.4, 0.4);
    case RewardRegime::nonlinear:
      return 0.3 * std::sin(2.0 * x0);
    case RewardRegime::complex: {
      // zero plateau, then a ramp of slope 0.5 capped at 0.4
      const double ramp = std::min(0.4, 0.5 * std::max(std::abs(x0) - kPlateauHalfWidth, 0.0));
      return x0 > 0.0 ? ramp : -ramp;
    }
    case RewardRegime::hard_margin:
      return x0 > 0.3 ? spec_.margin : -spec_.margin;
  }
  return 0.0;
}

double Oracle::raw_mean(int arm, Covariates x) const {
  if (spec_.family == DgpFamily::spi) return x[2] + (arm == 1 ? tau(x) : 0.0);
  const double shift = x.size() > 1 ? 0.1 * std::tanh(x[1]) : 0.0;
  const double t = tau(x);
  return 0.5 + shift + (arm == 1 ? 0.5 * t : -0.5 * t);
}

double Oracle::mean_outcome(int arm, Covariates x) const {
  const double m = raw_mean(arm, x);
  if (spec_.family == DgpFamily::spi) return m;
  return clipped_normal_mean(m, spec_.noise_sigma);
}

double Oracle::propensity(Covariates x) const {
  if (spec_.propensity_kind == PropensityKind::constant) return 0.5;
  const double t = spec_.family == DgpFamily::spi ? x[0] - 0.5 : x[0];
  return std::clamp(sigmoid(t), 0.1, 0.9);
}

std::vector<double> Oracle::draw_covariates(CounterRng& rng) const {
  std::vector<double> x(spec_.dim);
  if (spec_.family == DgpFamily::spi) {
    for (auto& v : x) v = rng.uniform();
    return x;
  }
  for (auto& v : x) v = rng.normal();
  if (spec_.support_points > 0) {
    const double step = 4.0 / static_cast<double>(spec_.support_points - 1);
    for (auto& v : x) {
      const double k = std::round((std::clamp(v, -2.0, 2.0) + 2.0) / step);
      v = -2.0 + k * step;
    }
  }
  return x;
}

double Oracle::draw_outcome(int arm, Covariates x, CounterRng& rng) const {
  const double y = raw_mean(arm, x) + spec_.noise_sigma * rng.normal();
  return spec_.family == DgpFamily::spi ? y : std::clamp(y, 0.0, 1.0);
}

NuisanceModel Oracle::nuisance() const {
  const Oracle self = *this;
  return NuisanceModel([self](int arm, Covariates x) { return self.mean_outcome(arm, x); },
                       [self](Covariates x) { return self.propensity(x); }, spec_.kappa, 0.0);
}

Generated generate(const DgpSpec& spec, std::size_t n, std::uint64_t replication) {
  if (n < 1) throw InputError("generate: n must be >= 1");
  Oracle oracle(spec);
  CounterRng x_rng(spec.seed, replication, "covariates");
  CounterRng d_rng(spec.seed, replication, "treatment");
  CounterRng y_rng(spec.seed, replication, "noise");
  std::vector<Sample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.x = oracle.draw_covariates(x_rng);
    const double p = oracle.propensity(s.x);
    s.d = d_rng.uniform() < p ? 1 : 0;
    s.y = oracle.draw_outcome(s.d, s.x, y_rng);
    s.propensity = p;
    samples.push_back(std::move(s));
  }
  const bool bounded = spec.family == DgpFamily::abstention;
  return {Dataset(std::move(samples), spec.kappa, spec.dim, bounded), std::move(oracle)};
}

BinaryPolicy spi_baseline(const DgpSpec& spec) {
  std::vector<double> w(spec.dim, 0.0);
  w[0] = 1.0;
  w[1] = 1.0;
  return BinaryPolicy::linear(std::move(w), -(1.0 + spec.baseline_gap));
}

BinaryPolicy spi_optimal(const DgpSpec& spec) {
  std::vector<double> w(spec.dim, 0.0);
  w[0] = 1.0;
  w[1] = 1.0;
  return BinaryPolicy::linear(std::move(w), -1.0);
}

PolicyClass default_policy_class(const DgpSpec& spec) {
  spec.validate();
  if (spec.family == DgpFamily::spi) {
    const std::vector<double> weights{-1.0, -0.5, 0.0, 0.5, 1.0};
    const auto intercepts = linspace(-2.0, 2.0, 41);
    auto linear = linear_threshold_class(spec.dim, 0, 1, weights, intercepts, 3);
    std::vector<std::size_t> features(spec.dim);
    for (std::size_t j = 0; j < spec.dim; ++j) features[j] = j;
    const auto thresholds = linspace(0.05, 0.95, 19);
    auto axis = axis_threshold_class(features, thresholds, 2);
    return merge_classes(linear, axis, 3);
  }
  std::vector<std::size_t> features{0};
  if (spec.dim > 1) features.push_back(1);
  const auto thresholds = linspace(-2.5, 2.5, 51);
  return axis_threshold_class(features, thresholds, 2);
}

// ---------------------------------------------------------------------------

namespace {

MonteCarloValue summarize(double sum, double sum_sq, std::size_t n) {
  const auto nn = static_cast<double>(n);
  const double mean = sum / nn;
  const double var = std::max(0.0, (sum_sq - nn * mean * mean) / (nn - 1.0));
  return {mean, std::sqrt(var / nn)};
}

}  // namespace

MonteCarloValue true_value(const BinaryPolicy& policy, const Oracle& oracle, std::size_t mc_n,
                           std::uint64_t stream) {
  if (mc_n < 2) throw InputError("true_value: mc_n must be >= 2");
  CounterRng x_rng(oracle.spec().seed, stream, "truth-covariates");
  CounterRng y_rng(oracle.spec().seed, stream, "truth-outcomes");
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < mc_n; ++i) {
    const auto x = oracle.draw_covariates(x_rng);
    const double y = oracle.draw_outcome(policy.decide(x), x, y_rng);
    sum += y;
    sum_sq += y * y;
  }
  return summarize(sum, sum_sq, mc_n);
}

MonteCarloValue true_value(const AbstainingPolicy& policy, const Oracle& oracle, double bonus,
                           std::size_t mc_n, std::uint64_t stream) {
  if (mc_n < 2) throw InputError("true_value: mc_n must be >= 2");
  CounterRng x_rng(oracle.spec().seed, stream, "truth-covariates");
  CounterRng y_rng(oracle.spec().seed, stream, "truth-outcomes");
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < mc_n; ++i) {
    const auto x = oracle.draw_covariates(x_rng);
    const Action a = policy(x);
    double y;
    if (a == Action::abstain) {
      y = 0.5 * (oracle.mean_outcome(0, x) + oracle.mean_outcome(1, x)) + bonus;
    } else {
      y = oracle.draw_outcome(to_int(a), x, y_rng);
    }
    sum += y;
    sum_sq += y * y;
  }
  return summarize(sum, sum_sq, mc_n);
}

TruthSample::TruthSample(const Oracle& oracle, std::size_t size, std::uint64_t stream) {
  if (size < 1) throw InputError("TruthSample: size must be >= 1");
  CounterRng rng(oracle.spec().seed, stream, "truth-sample");
  points_.reserve(size);
  mu0_.reserve(size);
  mu1_.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    auto x = oracle.draw_covariates(rng);
    mu0_.push_back(oracle.mean_outcome(0, x));
    mu1_.push_back(oracle.mean_outcome(1, x));
    points_.push_back(std::move(x));
  }
}

std::vector<std::uint8_t> TruthSample::labels(const BinaryPolicy& policy) const {
  std::vector<std::uint8_t> out(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i)
    out[i] = static_cast<std::uint8_t>(policy.decide(points_[i]));
  return out;
}

std::vector<std::uint8_t> TruthSample::labels(const AbstainingPolicy& policy) const {
  std::vector<std::uint8_t> out(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i)
    out[i] = static_cast<std::uint8_t>(policy(points_[i]));
  return out;
}

double TruthSample::value(std::span<const std::uint8_t> labels, double bonus) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    switch (labels[i]) {
      case 0:
        sum += mu0_[i];
        break;
      case 1:
        sum += mu1_[i];
        break;
      default:
        sum += 0.5 * (mu0_[i] + mu1_[i]) + bonus;
    }
  }
  return sum / static_cast<double>(labels.size());
}

double TruthSample::value(const BinaryPolicy& policy) const { return value(labels(policy)); }

double TruthSample::value(const AbstainingPolicy& policy, double bonus) const {
  return value(labels(policy), bonus);
}

double TruthSample::abstention_rate(std::span<const std::uint8_t> labels) {
  if (labels.empty()) return 0.0;
  std::size_t count = 0;
  for (auto l : labels) count += l == static_cast<std::uint8_t>(Action::abstain) ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(labels.size());
}

double estimate_err_dr(const NuisanceModel& nuisance, const Oracle& oracle, std::size_t mc_n,
                       std::uint64_t stream) {
  if (mc_n < 1) throw InputError("estimate_err_dr: mc_n must be >= 1");
  CounterRng rng(oracle.spec().seed, stream, "err-dr");
  double sum = 0.0;
  for (std::size_t i = 0; i < mc_n; ++i) {
    const auto x = oracle.draw_covariates(rng);
    const double dp = nuisance.p(x) - oracle.propensity(x);
    double dg = 0.0;
    for (int arm = 0; arm <= 1; ++arm) {
      const double e = nuisance.g(arm, x) - oracle.mean_outcome(arm, x);
      dg += e * e;
    }
    sum += dp * dp * dg;
  }
  return std::sqrt(sum / static_cast<double>(mc_n));
}

}  // namespace abstain
