#include "abstain/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <unordered_map>

#include "abstain/rng.hpp"

namespace abstain {

std::string to_string(Action a) {
  switch (a) {
    case Action::control:
      return "0";
    case Action::treat:
      return "1";
    case Action::abstain:
      return "*";
  }
  return "?";
}

namespace {

std::uint64_t content_id(const std::vector<Sample>& samples) {
  std::uint64_t h = tag_of("dataset");
  for (const auto& s : samples) {
    for (double v : s.x) h = hash_combine(h, std::bit_cast<std::uint64_t>(v));
    h = hash_combine(h, static_cast<std::uint64_t>(s.d));
    h = hash_combine(h, std::bit_cast<std::uint64_t>(s.y));
  }
  return h;
}

}  // namespace

Dataset::Dataset(std::vector<Sample> samples, double kappa, std::size_t dim, bool bounded_outcomes)
    : Dataset(std::move(samples), kappa, dim, bounded_outcomes, 0) {
  id_ = content_id(samples_);
}

Dataset::Dataset(std::vector<Sample> samples, double kappa, std::size_t dim, bool bounded_outcomes,
                 std::uint64_t id)
    : samples_(std::move(samples)),
      kappa_(kappa),
      dim_(dim),
      bounded_outcomes_(bounded_outcomes),
      id_(id) {
  if (!(kappa_ > 0.0 && kappa_ <= 0.5)) throw InputError("kappa must lie in (0, 0.5]");
  constexpr double slack = 1e-12;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (s.x.size() != dim_)
      throw InputError("sample " + std::to_string(i) + " has dimension " +
                       std::to_string(s.x.size()) + ", expected " + std::to_string(dim_));
    if (s.d != 0 && s.d != 1)
      throw InputError("sample " + std::to_string(i) + " has treatment outside {0,1}");
    if (s.propensity &&
        (*s.propensity < kappa_ - slack || *s.propensity > 1.0 - kappa_ + slack))
      throw InputError("sample " + std::to_string(i) + " propensity outside [kappa, 1-kappa]");
  }
}

bool Dataset::has_propensities() const {
  return std::all_of(samples_.begin(), samples_.end(),
                     [](const Sample& s) { return s.propensity.has_value(); });
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Sample> out;
  out.reserve(indices.size());
  std::uint64_t id = hash_combine(id_, indices.size());
  for (auto i : indices) {
    if (i >= samples_.size()) throw InputError("subset index out of range");
    out.push_back(samples_[i]);
    id = hash_combine(id, i);
  }
  return Dataset(std::move(out), kappa_, dim_, bounded_outcomes_, id);
}

Dataset Dataset::concat(const Dataset& other) const {
  if (other.dim_ != dim_ || other.kappa_ != kappa_)
    throw InputError("concat: datasets differ in dimension or kappa");
  std::vector<Sample> out = samples_;
  out.insert(out.end(), other.samples_.begin(), other.samples_.end());
  return Dataset(std::move(out), kappa_, dim_, bounded_outcomes_ && other.bounded_outcomes_,
                 hash_combine(id_, other.id_));
}

// ---------------------------------------------------------------------------

BinaryPolicy::BinaryPolicy(Rule rule) : rule_(std::move(rule)) {
  if (const auto* c = std::get_if<ConstantPolicy>(&rule_); c && c->label != 0 && c->label != 1)
    throw InputError("constant policy label must be 0 or 1");
  if (const auto* t = std::get_if<TablePolicy>(&rule_)) {
    if (t->default_label != 0 && t->default_label != 1)
      throw InputError("table default label must be 0 or 1");
    for (const auto& [k, v] : t->labels)
      if (v != 0 && v != 1) throw InputError("table labels must be 0 or 1");
  }
  if (const auto* s = std::get_if<SplicePolicy>(&rule_); s && (!s->base || !s->member || !s->fill))
    throw InputError("splice policy needs base, member and fill");
  if (const auto* c = std::get_if<CallablePolicy>(&rule_); c && !(c->fn && *c->fn))
    throw InputError("callable policy needs a function");
}

BinaryPolicy BinaryPolicy::constant(int label) { return BinaryPolicy(ConstantPolicy{label}); }

BinaryPolicy BinaryPolicy::axis(std::size_t feature, double threshold, bool greater) {
  return BinaryPolicy(AxisThreshold{feature, threshold, greater});
}

BinaryPolicy BinaryPolicy::linear(std::vector<double> weights, double intercept) {
  return BinaryPolicy(LinearThreshold{std::move(weights), intercept});
}

namespace {

struct Decider {
  Covariates x;

  int operator()(const AxisThreshold& r) const {
    if (r.feature >= x.size())
      throw InputError("axis policy reads feature " + std::to_string(r.feature) +
                       " of a " + std::to_string(x.size()) + "-dimensional point");
    const bool above = x[r.feature] > r.threshold;
    return (above == r.greater) ? 1 : 0;
  }
  int operator()(const LinearThreshold& r) const {
    if (r.weights.size() != x.size())
      throw InputError("linear policy expects dimension " + std::to_string(r.weights.size()) +
                       ", got " + std::to_string(x.size()));
    double s = r.intercept;
    for (std::size_t j = 0; j < x.size(); ++j) s += r.weights[j] * x[j];
    return s > 0.0 ? 1 : 0;
  }
  int operator()(const TablePolicy& r) const {
    if (!r.labels.empty() && r.labels.begin()->first.size() != x.size())
      throw InputError("table policy expects dimension " +
                       std::to_string(r.labels.begin()->first.size()) + ", got " +
                       std::to_string(x.size()));
    const auto it = r.labels.find(std::vector<double>(x.begin(), x.end()));
    if (it != r.labels.end()) return it->second;
    return r.fallback ? r.fallback->decide(x) : r.default_label;
  }
  int operator()(const ConstantPolicy& r) const { return r.label; }
  int operator()(const CallablePolicy& r) const { return (*r.fn)(x) > 0 ? 1 : 0; }
  int operator()(const SplicePolicy& r) const {
    const int b = r.base->decide(x);
    return r.member->decide(x) == b ? b : r.fill->decide(x);
  }
};

}  // namespace

int BinaryPolicy::decide(Covariates x) const { return std::visit(Decider{x}, rule_); }

std::string BinaryPolicy::kind() const {
  struct Namer {
    std::string operator()(const AxisThreshold&) const { return "axis"; }
    std::string operator()(const LinearThreshold&) const { return "linear"; }
    std::string operator()(const TablePolicy&) const { return "table"; }
    std::string operator()(const ConstantPolicy&) const { return "constant"; }
    std::string operator()(const SplicePolicy&) const { return "splice"; }
    std::string operator()(const CallablePolicy&) const { return "callable"; }
  };
  return std::visit(Namer{}, rule_);
}

namespace {

bool same_rule(const AxisThreshold& a, const AxisThreshold& b) {
  return a.feature == b.feature && a.threshold == b.threshold && a.greater == b.greater;
}
bool same_rule(const LinearThreshold& a, const LinearThreshold& b) {
  return a.weights == b.weights && a.intercept == b.intercept;
}
bool same_ptr(const std::shared_ptr<const BinaryPolicy>& a,
              const std::shared_ptr<const BinaryPolicy>& b) {
  if (!a || !b) return a == b;
  return a == b || *a == *b;
}
bool same_rule(const TablePolicy& a, const TablePolicy& b) {
  return a.labels == b.labels && a.default_label == b.default_label &&
         same_ptr(a.fallback, b.fallback);
}
bool same_rule(const ConstantPolicy& a, const ConstantPolicy& b) { return a.label == b.label; }
bool same_rule(const CallablePolicy& a, const CallablePolicy& b) { return a.fn == b.fn; }
bool same_rule(const SplicePolicy& a, const SplicePolicy& b) {
  return same_ptr(a.base, b.base) && same_ptr(a.member, b.member) && same_ptr(a.fill, b.fill);
}

}  // namespace

bool operator==(const BinaryPolicy& a, const BinaryPolicy& b) {
  if (a.rule().index() != b.rule().index()) return false;
  return std::visit(
      [&](const auto& ra) {
        using T = std::decay_t<decltype(ra)>;
        return same_rule(ra, std::get<T>(b.rule()));
      },
      a.rule());
}

// ---------------------------------------------------------------------------

AbstainingPolicy::AbstainingPolicy(BinaryPolicy base, BinaryPolicy member)
    : base_(std::move(base)), member_(std::move(member)) {}

Action AbstainingPolicy::operator()(Covariates x) const {
  const int b = base_.decide(x);
  return member_.decide(x) == b ? static_cast<Action>(b) : Action::abstain;
}

bool AbstainingPolicy::abstains(Covariates x) const {
  return base_.decide(x) != member_.decide(x);
}

Action evaluate_policy(const BinaryPolicy& policy, Covariates x) { return policy(x); }
Action evaluate_policy(const AbstainingPolicy& policy, Covariates x) { return policy(x); }

std::vector<std::uint8_t> label_samples(const BinaryPolicy& policy, const Dataset& data) {
  std::vector<std::uint8_t> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out[i] = static_cast<std::uint8_t>(policy.decide(data[i].x));
  return out;
}

std::vector<std::uint8_t> label_samples(const AbstainingPolicy& policy, const Dataset& data) {
  std::vector<std::uint8_t> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out[i] = static_cast<std::uint8_t>(policy(data[i].x));
  return out;
}

double disagreement_mass(const BinaryPolicy& p1, const BinaryPolicy& p2, const Dataset& data) {
  if (data.empty()) throw InputError("disagreement_mass: empty dataset");
  std::size_t count = 0;
  for (const auto& s : data.samples()) count += p1.decide(s.x) != p2.decide(s.x) ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------

PolicyClass::PolicyClass(std::vector<BinaryPolicy> policies, int vc_dim)
    : policies_(std::move(policies)), vc_dim_(vc_dim) {
  if (policies_.empty()) throw InputError("policy class must be nonempty");
  if (vc_dim_ < 1) throw InputError("declared VC dimension must be >= 1");
}

namespace {

struct LabelingHash {
  std::size_t operator()(const std::vector<std::uint8_t>& v) const {
    std::uint64_t h = 0;
    for (auto b : v) h = hash_combine(h, b);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

std::vector<std::size_t> PolicyClass::distinct_on(const Dataset& data) const {
  std::unordered_map<std::vector<std::uint8_t>, std::size_t, LabelingHash> seen;
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < policies_.size(); ++k) {
    if (seen.emplace(label_samples(policies_[k], data), k).second) keep.push_back(k);
  }
  return keep;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out;
  if (count == 0) return out;
  if (count == 1) return {lo};
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  return out;
}

PolicyClass axis_threshold_class(std::span<const std::size_t> features,
                                 std::span<const double> thresholds, int vc_dim) {
  std::vector<BinaryPolicy> out;
  for (auto j : features)
    for (double t : thresholds) {
      out.push_back(BinaryPolicy::axis(j, t, true));
      out.push_back(BinaryPolicy::axis(j, t, false));
    }
  return PolicyClass(std::move(out), vc_dim);
}

PolicyClass linear_threshold_class(std::size_t dim, std::size_t feature_a, std::size_t feature_b,
                                   std::span<const double> weight_grid,
                                   std::span<const double> intercept_grid, int vc_dim) {
  if (feature_a >= dim || feature_b >= dim)
    throw InputError("linear_threshold_class: feature index out of range");
  std::vector<BinaryPolicy> out;
  for (double wa : weight_grid)
    for (double wb : weight_grid) {
      if (wa == 0.0 && wb == 0.0) continue;
      for (double b : intercept_grid) {
        std::vector<double> w(dim, 0.0);
        w[feature_a] = wa;
        w[feature_b] = wb;
        out.push_back(BinaryPolicy::linear(std::move(w), b));
      }
    }
  return PolicyClass(std::move(out), vc_dim);
}

PolicyClass merge_classes(const PolicyClass& a, const PolicyClass& b, int vc_dim) {
  std::vector<BinaryPolicy> out = a.policies();
  out.insert(out.end(), b.policies().begin(), b.policies().end());
  return PolicyClass(std::move(out), vc_dim);
}

// ---------------------------------------------------------------------------

NuisanceModel::NuisanceModel(Regression g_hat, Propensity p_hat, double kappa,
                             std::optional<double> err_dr_bound,
                             std::optional<std::uint64_t> fitted_on)
    : g_hat_(std::move(g_hat)),
      p_hat_(std::move(p_hat)),
      kappa_(kappa),
      err_dr_bound_(err_dr_bound),
      fitted_on_(fitted_on) {
  if (!g_hat_ || !p_hat_) throw InputError("nuisance model needs both g_hat and p_hat");
  if (!(kappa_ > 0.0 && kappa_ <= 0.5)) throw InputError("kappa must lie in (0, 0.5]");
  if (err_dr_bound_ && *err_dr_bound_ < 0.0) throw InputError("Err_DR bound must be >= 0");
}

double NuisanceModel::p(Covariates x) const {
  return std::clamp(p_hat_(x), kappa_, 1.0 - kappa_);
}

NuisanceModel NuisanceModel::with_err_dr(double err) const {
  return NuisanceModel(g_hat_, p_hat_, kappa_, err, fitted_on_);
}

}  // namespace abstain
