#include "abstain/margin.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>

#include "abstain/rng.hpp"

namespace abstain {

void MarginConfig::validate() const {
  if (!(margin > 0.0)) throw InputError("margin h must be > 0");
  if (finite_d_cap < 1) throw InputError("finite_d_cap must be >= 1");
  if (finite_d_cap > 30) throw InputError("finite_d_cap above 30 is not enumerable");
  learner.validate();
}

double labeling_value(const ArmScores& scores, std::span<const std::size_t> point_of_sample,
                      std::uint64_t labeling) {
  double sum = 0.0;
  for (std::size_t i = 0; i < point_of_sample.size(); ++i) {
    const bool treat = (labeling >> point_of_sample[i]) & 1U;
    sum += treat ? scores.treat[i] : scores.control[i];
  }
  return sum / static_cast<double>(point_of_sample.size());
}

namespace {

std::array<Dataset, 3> split_thirds(const Dataset& data, std::uint64_t seed) {
  CounterRng rng(seed, 0, "split-thirds");
  const auto idx = shuffled_indices(data.size(), rng);
  const std::size_t base = data.size() / 3;
  const std::size_t extra = data.size() % 3;
  std::size_t start = 0;
  std::vector<Dataset> parts;
  for (std::size_t p = 0; p < 3; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    parts.push_back(data.subset(std::span(idx).subspan(start, len)));
    start += len;
  }
  return {parts[0], parts[1], parts[2]};
}

}  // namespace

MarginFit margin_learn(const Dataset& data, const PolicyClass& policies,
                       const MarginConfig& config, const CateOracle& cate_oracle,
                       const NuisanceModel* nuisance) {
  config.validate();
  if (data.size() < 6) throw InputError("margin_learn needs at least 6 samples");
  if (config.mode == MarginMode::cate_oracle && !cate_oracle)
    throw PreconditionError("CATE-oracle mode requires a CATE oracle");

  const auto parts = split_thirds(data, config.learner.seed);
  LearnerConfig learner = config.learner;
  learner.bonus = config.margin / 2.0;
  auto abstention = learn_abstaining(parts[0].concat(parts[1]), policies, learner, nuisance);
  const auto& result = abstention.result;
  const auto pi_hat = std::make_shared<const BinaryPolicy>(result.base());
  const auto member = std::make_shared<const BinaryPolicy>(result.member());

  const Dataset& third = parts[2];
  std::vector<std::size_t> in_region;
  for (std::size_t i = 0; i < third.size(); ++i)
    if (result.abstains(third[i].x)) in_region.push_back(i);

  MarginFit fit{*pi_hat, std::move(abstention), std::nullopt, {}, {}, 0.0, 0};
  if (!in_region.empty()) fit.refine_data = third.subset(in_region);

  if (config.mode == MarginMode::cate_oracle) {
    auto sign = std::make_shared<const std::function<int(Covariates)>>(
        [cate_oracle](Covariates x) { return cate_oracle(x) > 0.0 ? 1 : 0; });
    auto phi = std::make_shared<const BinaryPolicy>(CallablePolicy{sign, "cate-oracle-sign"});
    fit.policy = BinaryPolicy(SplicePolicy{pi_hat, member, phi});
    return fit;
  }

  if (!fit.refine_data) {
    // nothing to refine: phi defaults to pi_hat on the abstention region
    fit.policy = BinaryPolicy(SplicePolicy{pi_hat, member, pi_hat});
    return fit;
  }

  const Dataset& refine = *fit.refine_data;
  std::map<std::vector<double>, std::size_t> point_index;
  std::vector<std::size_t> point_of_sample(refine.size());
  for (std::size_t i = 0; i < refine.size(); ++i) {
    auto [it, inserted] = point_index.emplace(refine[i].x, point_index.size());
    if (inserted) fit.refine_points.push_back(refine[i].x);
    point_of_sample[i] = it->second;
  }
  const std::size_t m = fit.refine_points.size();
  if (m > config.finite_d_cap)
    throw CapacityError("abstention region holds " + std::to_string(m) +
                        " distinct points, above finite_d_cap = " +
                        std::to_string(config.finite_d_cap));

  const bool dr = config.learner.dr_mode;
  const auto scores = arm_scores(refine, dr ? Estimator::dr : Estimator::ipw, nuisance);
  const std::uint64_t count = std::uint64_t{1} << m;
  std::uint64_t best = 0;
  double best_value = labeling_value(scores, point_of_sample, 0);
  for (std::uint64_t labeling = 1; labeling < count; ++labeling) {
    const double v = labeling_value(scores, point_of_sample, labeling);
    if (v > best_value) {
      best_value = v;
      best = labeling;
    }
  }
  fit.labelings_evaluated = count;
  fit.refine_value = best_value;

  TablePolicy table;
  table.fallback = pi_hat;
  for (std::size_t j = 0; j < m; ++j) {
    const int label = static_cast<int>((best >> j) & 1U);
    fit.refine_labels.push_back(label);
    table.labels.emplace(fit.refine_points[j], label);
  }
  auto phi = std::make_shared<const BinaryPolicy>(std::move(table));
  fit.policy = BinaryPolicy(SplicePolicy{pi_hat, member, phi});
  return fit;
}

CateOracle noisy_cate_oracle(const Oracle& truth, double scale, std::size_t n, double beta,
                             std::uint64_t seed) {
  const double magnitude = scale * std::pow(static_cast<double>(n), -beta);
  return [truth, magnitude, seed](Covariates x) {
    std::uint64_t key = mix64(seed ^ tag_of("cate-oracle"));
    for (double v : x) key = hash_combine(key, std::bit_cast<std::uint64_t>(v));
    CounterRng rng(key);
    return truth.tau(x) + magnitude * rng.normal();
  };
}

}  // namespace abstain
