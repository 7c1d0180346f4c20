#include "abstain/value.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <string>

namespace abstain {

namespace {

void require_nonempty(const Dataset& data, const char* op) {
  if (data.empty()) throw InputError(std::string(op) + ": empty dataset");
}

void require_propensities(const Dataset& data, const char* op) {
  if (!data.has_propensities())
    throw PreconditionError(std::string(op) + ": every sample needs a known propensity");
}

double ipw_term(int label, const Sample& s) {
  const double p = *s.propensity;
  return label == 1 ? s.y * s.d / p : s.y * (1 - s.d) / (1.0 - p);
}

}  // namespace

ArmScores ipw_arm_scores(const Dataset& data) {
  require_propensities(data, "ipw");
  ArmScores out;
  out.treat.resize(data.size());
  out.control.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.treat[i] = ipw_term(1, data[i]);
    out.control[i] = ipw_term(0, data[i]);
  }
  return out;
}

ArmScores dr_arm_scores(const Dataset& data, const NuisanceModel& nuisance) {
  ArmScores out;
  out.treat.resize(data.size());
  out.control.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.treat[i] = dr_pseudo_outcome(nuisance, data[i], 1);
    out.control[i] = dr_pseudo_outcome(nuisance, data[i], 0);
  }
  return out;
}

ArmScores arm_scores(const Dataset& data, Estimator estimator, const NuisanceModel* nuisance) {
  if (estimator == Estimator::ipw) return ipw_arm_scores(data);
  if (!nuisance) throw PreconditionError("DR estimation requires a nuisance model");
  return dr_arm_scores(data, *nuisance);
}

std::vector<double> unit_scores(const ArmScores& scores, std::span<const std::uint8_t> labels,
                                double bonus) {
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    switch (labels[i]) {
      case 0:
        out[i] = scores.control[i];
        break;
      case 1:
        out[i] = scores.treat[i];
        break;
      default:
        out[i] = 0.5 * (scores.treat[i] + scores.control[i]) + bonus;
    }
  }
  return out;
}

double mean_score(const ArmScores& scores, std::span<const std::uint8_t> labels, double bonus) {
  if (labels.empty()) throw InputError("mean_score: empty dataset");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    switch (labels[i]) {
      case 0:
        sum += scores.control[i];
        break;
      case 1:
        sum += scores.treat[i];
        break;
      default:
        sum += 0.5 * (scores.treat[i] + scores.control[i]) + bonus;
    }
  }
  return sum / static_cast<double>(labels.size());
}

namespace {

ValueEstimate estimate(std::vector<double> per_unit) {
  ValueEstimate v;
  v.n = per_unit.size();
  double sum = 0.0;
  for (double s : per_unit) sum += s;
  v.value = sum / static_cast<double>(v.n);
  v.per_unit = std::move(per_unit);
  return v;
}

}  // namespace

ValueEstimate ipw_value(const BinaryPolicy& policy, const Dataset& data) {
  require_nonempty(data, "ipw_value");
  const auto scores = ipw_arm_scores(data);
  return estimate(unit_scores(scores, label_samples(policy, data)));
}

double normalized_score(const BinaryPolicy& policy, const Sample& sample, double kappa) {
  if (!sample.propensity) throw PreconditionError("normalized_score: sample lacks a propensity");
  return kappa * ipw_term(policy.decide(sample.x), sample);
}

double score_distance(const BinaryPolicy& p1, const BinaryPolicy& p2, const Dataset& data,
                      double kappa) {
  require_nonempty(data, "score_distance");
  require_propensities(data, "score_distance");
  double sum = 0.0;
  for (const auto& s : data.samples()) {
    const int a = p1.decide(s.x);
    const int b = p2.decide(s.x);
    if (a != b) sum += std::abs(kappa * (ipw_term(a, s) - ipw_term(b, s)));
  }
  return sum / static_cast<double>(data.size());
}

ValueEstimate ipw_value_abstain(const AbstainingPolicy& policy, const Dataset& data, double bonus) {
  require_nonempty(data, "ipw_value_abstain");
  if (!(bonus >= 0.0)) throw InputError("abstention bonus must be >= 0");
  const auto scores = ipw_arm_scores(data);
  return estimate(unit_scores(scores, label_samples(policy, data), bonus));
}

double dr_pseudo_outcome(const NuisanceModel& nuisance, const Sample& sample, int arm) {
  if (arm != 0 && arm != 1) throw InputError("arm must be 0 or 1");
  const double g = nuisance.g(arm, sample.x);
  if (sample.d != arm) return g;
  const double p = nuisance.p(sample.x);
  const double q = arm == 1 ? p : 1.0 - p;
  return g + (sample.y - g) / q;
}

ValueEstimate dr_value(const BinaryPolicy& policy, const Dataset& data,
                       const NuisanceModel& nuisance) {
  require_nonempty(data, "dr_value");
  const auto scores = dr_arm_scores(data, nuisance);
  return estimate(unit_scores(scores, label_samples(policy, data)));
}

ValueEstimate dr_value_abstain(const AbstainingPolicy& policy, const Dataset& data,
                               const NuisanceModel& nuisance, double bonus) {
  require_nonempty(data, "dr_value_abstain");
  if (!(bonus >= 0.0)) throw InputError("abstention bonus must be >= 0");
  const auto scores = dr_arm_scores(data, nuisance);
  return estimate(unit_scores(scores, label_samples(policy, data), bonus));
}

// ---------------------------------------------------------------------------

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw InputError("normal_quantile: prob must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

double student_t_quantile(double prob, double dof) {
  if (!(prob > 0.0 && prob < 1.0)) throw InputError("student_t_quantile: prob must lie in (0,1)");
  if (!(dof > 0.0)) throw InputError("student_t_quantile: dof must be positive");
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), prob);
}

MeanAndDeviation mean_and_sd(std::span<const double> values) {
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

namespace {

void check_lcb_inputs(std::span<const double> differences, double delta, int k) {
  if (differences.size() < 2) throw InputError("lower confidence bound needs n >= 2");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
  if (k < 1) throw InputError("Bonferroni factor k must be >= 1");
  if (delta / k >= 1.0) throw InputError("delta/k must be < 1");
}

}  // namespace

double lcb_from_differences(std::span<const double> differences, double delta, int k) {
  check_lcb_inputs(differences, delta, k);
  const auto [mean, sd] = mean_and_sd(differences);
  if (sd == 0.0) return mean;
  const double z = normal_quantile(1.0 - delta / k);
  return mean - z * sd / std::sqrt(static_cast<double>(differences.size()));
}

double t_lcb_from_differences(std::span<const double> differences, double delta) {
  check_lcb_inputs(differences, delta, 1);
  const auto [mean, sd] = mean_and_sd(differences);
  if (sd == 0.0) return mean;
  const auto n = static_cast<double>(differences.size());
  return mean - student_t_quantile(1.0 - delta, n - 1.0) * sd / std::sqrt(n);
}

std::vector<double> score_differences(const BinaryPolicy& candidate, const BinaryPolicy& baseline,
                                      const Dataset& data, Estimator estimator,
                                      const NuisanceModel* nuisance) {
  const auto scores = arm_scores(data, estimator, nuisance);
  const auto a = unit_scores(scores, label_samples(candidate, data));
  const auto b = unit_scores(scores, label_samples(baseline, data));
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  return diff;
}

double lcb_difference(const BinaryPolicy& candidate, const BinaryPolicy& baseline,
                      const Dataset& data, double delta, int k, Estimator estimator,
                      const NuisanceModel* nuisance) {
  if (data.size() < 2) throw InputError("lcb_difference needs n >= 2");
  return lcb_from_differences(score_differences(candidate, baseline, data, estimator, nuisance),
                              delta, k);
}

}  // namespace abstain
