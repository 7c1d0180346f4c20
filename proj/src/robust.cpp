#include "abstain/robust.hpp"

#include <cmath>

namespace abstain {

RandomizingPolicy::RandomizingPolicy(Rule rule) : rule_(std::move(rule)) {
  if (!rule_) throw InputError("randomizing policy needs a rule");
}

RandomizingPolicy RandomizingPolicy::from_binary(const BinaryPolicy& policy) {
  return RandomizingPolicy([policy](Covariates x) {
    return policy.decide(x) == 1 ? RandomizedAction::treat : RandomizedAction::control;
  });
}

RandomizingPolicy RandomizingPolicy::from_abstaining(const AbstainingPolicy& policy) {
  return RandomizingPolicy([policy](Covariates x) {
    switch (policy(x)) {
      case Action::treat: return RandomizedAction::treat;
      case Action::control: return RandomizedAction::control;
      case Action::abstain: break;
    }
    return RandomizedAction::half;
  });
}

ConditionalMeans ConditionalMeans::from_truth(const TruthSample& truth) {
  return {truth.points(), truth.mu0(), truth.mu1()};
}

ConditionalMeans ConditionalMeans::from_grid(const Oracle& oracle,
                                             std::vector<std::vector<double>> points) {
  ConditionalMeans m{std::move(points), {}, {}};
  m.mu0.reserve(m.points.size());
  m.mu1.reserve(m.points.size());
  for (const auto& x : m.points) {
    m.mu0.push_back(oracle.mean_outcome(0, x));
    m.mu1.push_back(oracle.mean_outcome(1, x));
  }
  return m;
}

ConditionalMeans ConditionalMeans::plug_in(const Dataset& data, const NuisanceModel& nuisance) {
  ConditionalMeans m;
  for (const auto& s : data.samples()) {
    m.points.push_back(s.x);
    m.mu0.push_back(nuisance.g(0, s.x));
    m.mu1.push_back(nuisance.g(1, s.x));
  }
  return m;
}

namespace {

void check_inputs(std::size_t actions, const ConditionalMeans& means, double shift_radius) {
  if (!(shift_radius >= 0.0) || !std::isfinite(shift_radius))
    throw InputError("shift radius must be finite and >= 0");
  if (means.mu0.empty()) throw InputError("conditional means are empty");
  if (means.mu1.size() != means.size() ||
      (!means.points.empty() && means.points.size() != means.size()))
    throw InputError("conditional means have mismatched lengths");
  if (actions != means.size()) throw InputError("one action per point is required");
}

std::vector<RandomizedAction> actions_on(const RandomizingPolicy& policy,
                                         const ConditionalMeans& means) {
  if (means.points.size() != means.size())
    throw InputError("evaluating a policy needs the covariate points");
  std::vector<RandomizedAction> out;
  out.reserve(means.size());
  for (const auto& x : means.points) out.push_back(policy(x));
  return out;
}

}  // namespace

double worst_case_value(std::span<const RandomizedAction> actions, const ConditionalMeans& means,
                        double shift_radius) {
  check_inputs(actions.size(), means, shift_radius);
  double sum = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    switch (actions[i]) {
      case RandomizedAction::treat: sum += means.mu1[i] - shift_radius; break;
      case RandomizedAction::control: sum += means.mu0[i] - shift_radius; break;
      case RandomizedAction::half:
        sum += 0.5 * means.mu1[i] + 0.5 * means.mu0[i] - shift_radius / 2.0;
        break;
    }
  }
  return sum / static_cast<double>(actions.size());
}

double worst_case_value(const RandomizingPolicy& policy, const ConditionalMeans& means,
                        double shift_radius) {
  return worst_case_value(actions_on(policy, means), means, shift_radius);
}

ShiftCheck check_shift_equivalence(std::span<const RandomizedAction> actions,
                                   const ConditionalMeans& means, double shift_radius) {
  ShiftCheck out;
  out.lhs = worst_case_value(actions, means, shift_radius);
  // half -> abstain, rewarded (mu0 + mu1)/2 + r/2
  const double bonus = shift_radius / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    switch (actions[i]) {
      case RandomizedAction::treat: sum += means.mu1[i]; break;
      case RandomizedAction::control: sum += means.mu0[i]; break;
      case RandomizedAction::half: sum += (means.mu0[i] + means.mu1[i]) / 2.0 + bonus; break;
    }
  }
  out.rhs = sum / static_cast<double>(actions.size()) - shift_radius;
  out.gap = std::abs(out.lhs - out.rhs);
  return out;
}

ShiftCheck check_shift_equivalence(const RandomizingPolicy& policy, const ConditionalMeans& means,
                                   double shift_radius) {
  return check_shift_equivalence(actions_on(policy, means), means, shift_radius);
}

}  // namespace abstain
