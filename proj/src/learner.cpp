#include "abstain/learner.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "abstain/rng.hpp"

namespace abstain {

void LearnerConfig::validate() const {
  if (!(bonus >= 0.0)) throw InputError("abstention bonus must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
  if (vc_dim && *vc_dim < 1) throw InputError("VC dimension must be >= 1");
  if (!(radius_constant > 0.0)) throw InputError("radius constant must be > 0");
  if (err_dr && *err_dr < 0.0) throw InputError("Err_DR must be >= 0");
}

double selection_alpha(std::size_t n, int vc_dim, double delta) {
  if (n == 0) throw InputError("selection_alpha: n must be positive");
  const double nn = static_cast<double>(n);
  const double radicand = (vc_dim * std::log(nn / vc_dim) + std::log(1.0 / delta)) / nn;
  if (!(radicand > 0.0) || !std::isfinite(radicand))
    throw InputError("selection radius undefined for n=" + std::to_string(n) +
                     ", d=" + std::to_string(vc_dim));
  return std::sqrt(radicand);
}

std::pair<Dataset, Dataset> split_halves(const Dataset& data, std::uint64_t seed) {
  CounterRng rng(seed, 0, "split-halves");
  const auto idx = shuffled_indices(data.size(), rng);
  const std::size_t first = (data.size() + 1) / 2;
  return {data.subset(std::span(idx).first(first)), data.subset(std::span(idx).subspan(first))};
}

namespace {

using Labels = std::vector<std::uint8_t>;

struct LabelsHash {
  std::size_t operator()(const Labels& v) const {
    std::uint64_t h = 0x51ed27u;
    std::size_t i = 0;
    for (; i + 8 <= v.size(); i += 8) {
      std::uint64_t word = 0;
      for (std::size_t j = 0; j < 8; ++j) word |= static_cast<std::uint64_t>(v[i + j]) << (8 * j);
      h = hash_combine(h, word);
    }
    for (; i < v.size(); ++i) h = hash_combine(h, v[i]);
    return static_cast<std::size_t>(h);
  }
};

/// Class members with distinct labelings on `data` (first occurrence kept) and their labels.
struct DistinctMembers {
  std::vector<std::size_t> index;
  std::vector<Labels> labels;
};

DistinctMembers distinct_members(const PolicyClass& policies, const Dataset& data) {
  DistinctMembers out;
  std::unordered_set<Labels, LabelsHash> seen;
  for (std::size_t k = 0; k < policies.size(); ++k) {
    auto labels = label_samples(policies[k], data);
    if (seen.insert(labels).second) {
      out.index.push_back(k);
      out.labels.push_back(std::move(labels));
    }
  }
  return out;
}

std::size_t argmax_first(const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[best]) best = k;
  return best;
}

Estimator objective_of(const LearnerConfig& config) {
  return config.dr_mode ? Estimator::dr : Estimator::ipw;
}

int vc_dim_of(const LearnerConfig& config, const PolicyClass& policies) {
  return config.vc_dim.value_or(policies.vc_dim());
}

double err_dr_of(const LearnerConfig& config, const NuisanceModel* nuisance) {
  if (config.err_dr) return *config.err_dr;
  if (nuisance && nuisance->err_dr_bound()) return *nuisance->err_dr_bound();
  throw PreconditionError("DR mode needs an Err_DR bound (config or nuisance model)");
}

void check_dr_inputs(const LearnerConfig& config, const NuisanceModel* nuisance,
                     std::initializer_list<const Dataset*> sets) {
  if (!config.dr_mode) return;
  if (!nuisance) throw PreconditionError("DR mode requires a nuisance model");
  if (nuisance->fitted_on())
    for (const auto* d : sets)
      if (*nuisance->fitted_on() == d->id())
        throw PreconditionError("nuisance model was fitted on the learning data");
}

/// Near-optimal filter over the distinct members of the first half.
std::vector<std::size_t> near_optimal_positions(const Dataset& data, const DistinctMembers& members,
                                                const std::vector<double>& values,
                                                std::size_t hat, const LearnerConfig& config,
                                                int vc_dim, const NuisanceModel* nuisance) {
  double alpha = selection_alpha(data.size(), vc_dim, config.delta);
  if (config.dr_mode) alpha += err_dr_of(config, nuisance);
  const double kappa = data.kappa();
  const double scale = config.radius_constant / kappa;

  ArmScores ipw;
  if (!config.dr_mode) ipw = ipw_arm_scores(data);
  const auto& hat_labels = members.labels[hat];
  const auto n = static_cast<double>(data.size());

  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < members.labels.size(); ++k) {
    const auto& lk = members.labels[k];
    double m = 0.0;
    for (std::size_t i = 0; i < lk.size(); ++i) {
      if (lk[i] == hat_labels[i]) continue;
      if (config.dr_mode) {
        m += 1.0;
      } else {
        m += kappa * std::abs(ipw.treat[i] - ipw.control[i]);
      }
    }
    m /= n;
    const double radius = scale * (alpha * alpha + alpha * std::sqrt(m));
    if (values[hat] - values[k] <= radius) keep.push_back(k);
  }
  return keep;
}

}  // namespace

std::size_t ewm_index(const Dataset& data, const PolicyClass& policies, Estimator objective,
                      const NuisanceModel* nuisance) {
  if (data.empty()) throw InputError("ewm: empty dataset");
  const auto scores = arm_scores(data, objective, nuisance);
  const auto members = distinct_members(policies, data);
  std::vector<double> values(members.index.size());
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = mean_score(scores, members.labels[k]);
  return members.index[argmax_first(values)];
}

BinaryPolicy ewm(const Dataset& data, const PolicyClass& policies, Estimator objective,
                 const NuisanceModel* nuisance) {
  return policies[ewm_index(data, policies, objective, nuisance)];
}

std::vector<BinaryPolicy> near_optimal_set(const Dataset& data, const PolicyClass& policies,
                                           const BinaryPolicy& pi_hat, const LearnerConfig& config,
                                           const NuisanceModel* nuisance) {
  config.validate();
  if (data.empty()) throw InputError("near_optimal_set: empty dataset");
  check_dr_inputs(config, nuisance, {&data});
  const auto scores = arm_scores(data, objective_of(config), nuisance);
  const auto members = distinct_members(policies, data);
  const auto hat_labels = label_samples(pi_hat, data);
  std::size_t hat = members.labels.size();
  for (std::size_t k = 0; k < members.labels.size(); ++k)
    if (members.labels[k] == hat_labels) {
      hat = k;
      break;
    }
  if (hat == members.labels.size()) throw InputError("near_optimal_set: pi_hat is not in the class");

  std::vector<double> values(members.index.size());
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = mean_score(scores, members.labels[k]);
  const auto keep = near_optimal_positions(data, members, values, hat, config,
                                           vc_dim_of(config, policies), nuisance);
  std::vector<BinaryPolicy> out;
  out.reserve(keep.size());
  for (auto k : keep) out.push_back(policies[members.index[k]]);
  return out;
}

AbstentionFit learn_abstaining_on_split(const Dataset& first, const Dataset& second,
                                        const PolicyClass& policies, const LearnerConfig& config,
                                        const NuisanceModel* nuisance) {
  config.validate();
  if (first.empty() || second.empty()) throw InputError("learn_abstaining: empty split");
  check_dr_inputs(config, nuisance, {&first, &second});
  const Estimator objective = objective_of(config);
  const int vc_dim = vc_dim_of(config, policies);

  // Stage 1: EWM and the near-optimal set on the first half.
  const auto scores1 = arm_scores(first, objective, nuisance);
  const auto members = distinct_members(policies, first);
  std::vector<double> values(members.index.size());
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = mean_score(scores1, members.labels[k]);
  const std::size_t hat = argmax_first(values);
  const auto keep =
      near_optimal_positions(first, members, values, hat, config, vc_dim, nuisance);

  double alpha = selection_alpha(first.size(), vc_dim, config.delta);
  if (config.dr_mode) alpha += err_dr_of(config, nuisance);

  const BinaryPolicy& pi_hat = policies[members.index[hat]];
  std::vector<BinaryPolicy> near_optimal;
  near_optimal.reserve(keep.size());
  for (auto k : keep) near_optimal.push_back(policies[members.index[k]]);

  // Stage 2: abstention projection against pi_hat, abstaining EWM on the second half.
  const auto scores2 = arm_scores(second, objective, nuisance);
  const auto hat2 = label_samples(pi_hat, second);
  std::unordered_set<Labels, LabelsHash> seen;
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  Labels best_actions;
  for (std::size_t j = 0; j < near_optimal.size(); ++j) {
    Labels actions = label_samples(near_optimal[j], second);
    for (std::size_t i = 0; i < actions.size(); ++i)
      if (actions[i] != hat2[i]) actions[i] = static_cast<std::uint8_t>(Action::abstain);
    const double v = mean_score(scores2, actions, config.bonus);
    if (!seen.insert(actions).second) continue;
    if (v > best_value) {
      best_value = v;
      best = j;
      best_actions = std::move(actions);
    }
  }

  std::size_t abstained = 0;
  for (auto a : best_actions) abstained += a == static_cast<std::uint8_t>(Action::abstain) ? 1 : 0;

  AbstentionDiagnostics diag;
  diag.alpha = alpha;
  diag.near_optimal_size = near_optimal.size();
  diag.candidate_count = seen.size();
  diag.abstention_fraction = static_cast<double>(abstained) / static_cast<double>(second.size());
  diag.first_stage_value = values[hat];
  diag.second_stage_value = best_value;

  AbstainingPolicy result(pi_hat, near_optimal[best]);
  return AbstentionFit{pi_hat, std::move(near_optimal), std::move(result), diag};
}

AbstentionFit learn_abstaining(const Dataset& data, const PolicyClass& policies,
                               const LearnerConfig& config, const NuisanceModel* nuisance) {
  config.validate();
  if (data.size() < 4) throw InputError("learn_abstaining needs at least 4 samples");
  check_dr_inputs(config, nuisance, {&data});
  auto [first, second] = split_halves(data, config.seed);
  return learn_abstaining_on_split(first, second, policies, config, nuisance);
}

}  // namespace abstain
