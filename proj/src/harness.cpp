#include "abstain/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "abstain/margin.hpp"
#include "abstain/robust.hpp"
#include "abstain/safe.hpp"

namespace abstain {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::spi_noise_sweep: return "spi_noise_sweep";
    case Scenario::spi_gap_sweep: return "spi_gap_sweep";
    case Scenario::abstention_sweep: return "abstention_sweep";
    case Scenario::rate_check: return "rate_check";
    case Scenario::robust_check: return "robust_check";
  }
  return "?";
}

Scenario parse_scenario(const std::string& s) {
  for (auto sc : {Scenario::spi_noise_sweep, Scenario::spi_gap_sweep, Scenario::abstention_sweep,
                  Scenario::rate_check, Scenario::robust_check})
    if (to_string(sc) == s) return sc;
  throw InputError("unknown scenario '" + s + "'");
}

namespace {

bool is_spi(Scenario s) { return s == Scenario::spi_noise_sweep || s == Scenario::spi_gap_sweep; }

}  // namespace

const std::vector<std::string>& known_methods(Scenario s) {
  static const std::vector<std::string> spi{"algo2", "safe_ewm", "hcpi_t", "hcpi_ci", "ewm_plain"};
  static const std::vector<std::string> abst{"abstain", "abstain_dr", "margin_oracle", "ewm_plain"};
  static const std::vector<std::string> robust{"abstain"};
  if (is_spi(s)) return spi;
  if (s == Scenario::robust_check) return robust;
  return abst;
}

void ExperimentConfig::validate() const {
  dgp.validate();
  if (is_spi(scenario) && dgp.family != DgpFamily::spi)
    throw InputError(to_string(scenario) + " needs the spi DGP family");
  if (!is_spi(scenario) && dgp.family != DgpFamily::abstention)
    throw InputError(to_string(scenario) + " needs the abstention DGP family");
  if (n_grid.empty()) throw InputError("n_grid must be nonempty");
  for (auto n : n_grid)
    if (n < 8) throw InputError("every n in n_grid must be >= 8");
  if (sweep_values.empty()) throw InputError("sweep_values must be nonempty");
  for (double v : sweep_values)
    if (!std::isfinite(v)) throw InputError("sweep values must be finite");
  if (replications < 1) throw InputError("replications must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
  if (methods.empty()) throw InputError("methods must be nonempty");
  const auto& known = known_methods(scenario);
  for (const auto& m : methods)
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw InputError("method '" + m + "' is not available for " + to_string(scenario));
  if (truth_size < 1000) throw InputError("truth_size must be >= 1000");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InputError("train_fraction must lie in (0,1)");
  if (!(radius_constant > 0.0)) throw InputError("radius_constant must be > 0");
  for (std::size_t i = 0; i < sweep_values.size(); ++i) {
    if (scenario == Scenario::spi_noise_sweep && sweep_values[i] < 0.0)
      throw InputError("noise sigma must be >= 0");
    if ((scenario == Scenario::abstention_sweep || scenario == Scenario::rate_check ||
         scenario == Scenario::robust_check) &&
        sweep_values[i] < 0.0)
      throw InputError("bonus / shift radius must be >= 0");
  }
  SpiConfig spi;
  spi.bonus_grid = bonus_grid;
  spi.delta = delta;
  spi.validate();
}

namespace {

ExperimentConfig scenario_defaults(Scenario s) {
  ExperimentConfig c;
  c.scenario = s;
  switch (s) {
    case Scenario::spi_noise_sweep:
      c.n_grid = {200, 500, 1000, 2000, 5000};
      c.sweep_values = {0.01, 0.05, 0.1, 0.2, 0.5, 1.0};
      break;
    case Scenario::spi_gap_sweep:
      c.n_grid = {200, 500, 1000, 2000, 5000};
      c.sweep_values = {0.0, 0.05, 0.1, 0.2, 0.4};
      break;
    case Scenario::abstention_sweep:
      c.n_grid = {1000};
      c.sweep_values = {0.0, 0.01, 0.05, 0.1, 0.2};
      break;
    case Scenario::rate_check:
      c.n_grid = {250, 500, 1000, 2000, 4000};
      c.sweep_values = {0.05};
      c.replications = 200;
      break;
    case Scenario::robust_check:
      c.n_grid = {1000};
      c.sweep_values = {0.05, 0.1, 0.5};
      break;
  }
  if (is_spi(s)) {
    c.dgp.family = DgpFamily::spi;
  } else {
    c.dgp.family = DgpFamily::abstention;
    c.dgp.dim = 2;
    c.dgp.noise_sigma = 0.1;
    c.dgp.propensity_kind = PropensityKind::logistic;
    c.dgp.reward_regime = RewardRegime::complex;
  }
  c.methods = s == Scenario::robust_check || s == Scenario::rate_check
                  ? std::vector<std::string>{"abstain"}
                  : is_spi(s) ? known_methods(s)
                              : std::vector<std::string>{"abstain", "ewm_plain"};
  return c;
}

template <typename T>
void read_if(const Json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config field '") + key + "': " + e.what());
  }
}

void read_dgp(const Json& j, DgpSpec& spec) {
  if (!j.is_object()) throw InputError("config field 'dgp' must be an object");
  std::string text;
  if (j.contains("family")) {
    read_if(j, "family", text);
    spec.family = parse_family(text);
  }
  if (j.contains("propensity_kind")) {
    read_if(j, "propensity_kind", text);
    spec.propensity_kind = parse_propensity_kind(text);
  }
  if (j.contains("reward_regime")) {
    read_if(j, "reward_regime", text);
    spec.reward_regime = parse_regime(text);
  }
  read_if(j, "dim", spec.dim);
  read_if(j, "noise_sigma", spec.noise_sigma);
  read_if(j, "baseline_gap", spec.baseline_gap);
  read_if(j, "seed", spec.seed);
  read_if(j, "kappa", spec.kappa);
  read_if(j, "support_points", spec.support_points);
  read_if(j, "margin", spec.margin);
}

}  // namespace

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("experiment config must be a JSON object");
  std::string scenario;
  read_if(j, "scenario", scenario);
  if (scenario.empty()) throw InputError("experiment config needs a 'scenario'");
  auto c = scenario_defaults(parse_scenario(scenario));
  if (j.contains("dgp")) read_dgp(j.at("dgp"), c.dgp);
  read_if(j, "n_grid", c.n_grid);
  read_if(j, "sweep_values", c.sweep_values);
  read_if(j, "replications", c.replications);
  read_if(j, "delta", c.delta);
  read_if(j, "methods", c.methods);
  read_if(j, "output_path", c.output_path);
  read_if(j, "replications_path", c.replications_path);
  read_if(j, "bonus_grid", c.bonus_grid);
  read_if(j, "radius_constant", c.radius_constant);
  read_if(j, "train_fraction", c.train_fraction);
  read_if(j, "truth_size", c.truth_size);
  read_if(j, "threads", c.threads);
  c.validate();
  return c;
}

namespace {

/// Everything shared by the replications of one sweep value.
struct Cell {
  DgpSpec spec;
  Oracle oracle;
  PolicyClass policies;
  TruthSample truth;
  std::vector<double> tau;  // mu1 - mu0 on the truth points
  std::optional<BinaryPolicy> baseline;
  std::vector<std::uint8_t> baseline_labels;
  double best_in_class = 0.0;  // abstention family
};

DgpSpec cell_spec(const ExperimentConfig& config, double sweep_value) {
  DgpSpec spec = config.dgp;
  if (config.scenario == Scenario::spi_noise_sweep) spec.noise_sigma = sweep_value;
  if (config.scenario == Scenario::spi_gap_sweep) spec.baseline_gap = sweep_value;
  return spec;
}

Cell make_cell(const ExperimentConfig& config, double sweep_value) {
  const DgpSpec spec = cell_spec(config, sweep_value);
  Oracle oracle(spec);
  TruthSample truth(oracle, config.truth_size, tag_of("truth"));
  Cell cell{spec, oracle, default_policy_class(spec), std::move(truth), {}, std::nullopt, {}, 0.0};
  cell.tau.resize(cell.truth.size());
  for (std::size_t i = 0; i < cell.tau.size(); ++i)
    cell.tau[i] = cell.truth.mu1()[i] - cell.truth.mu0()[i];
  if (spec.family == DgpFamily::spi) {
    cell.baseline = spi_baseline(spec);
    cell.baseline_labels = cell.truth.labels(*cell.baseline);
  } else {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : cell.policies.policies()) best = std::max(best, cell.truth.value(p));
    cell.best_in_class = best;
  }
  return cell;
}

/// Data depends on (master seed, n, the DGP-changing sweep value, replication) only, so every
/// method sees the same sample.
std::uint64_t cell_key(const ExperimentConfig& config, std::size_t n, double sweep_value) {
  std::uint64_t key = hash_combine(config.dgp.seed, n);
  if (is_spi(config.scenario)) key = hash_combine(key, std::bit_cast<std::uint64_t>(sweep_value));
  return key;
}

/// Mean of (chosen - baseline) * tau over the truth points; exactly 0 for equal labelings.
double binary_gain(const Cell& cell, std::span<const std::uint8_t> chosen) {
  double sum = 0.0;
  for (std::size_t i = 0; i < chosen.size(); ++i)
    if (chosen[i] != cell.baseline_labels[i])
      sum += (static_cast<double>(chosen[i]) - static_cast<double>(cell.baseline_labels[i])) *
             cell.tau[i];
  return sum / static_cast<double>(chosen.size());
}

ReplicationResult run_spi_method(const ExperimentConfig& config, const Cell& cell,
                                 const std::string& method, const Dataset& data,
                                 std::uint64_t seed) {
  ReplicationResult r;
  const BinaryPolicy& baseline = *cell.baseline;
  SpiOutcome outcome{false, baseline, std::nullopt, {}, std::nullopt};
  if (method == "algo2") {
    SpiConfig spi;
    spi.bonus_grid = config.bonus_grid;
    spi.delta = config.delta;
    spi.train_fraction = config.train_fraction;
    spi.learner.delta = config.delta;
    spi.learner.radius_constant = config.radius_constant;
    spi.learner.seed = seed;
    spi.seed = seed;
    outcome = safe_policy_improvement(data, cell.policies, baseline, spi);
  } else if (method == "safe_ewm") {
    outcome = safe_ewm(data, cell.policies, baseline, config.delta, Estimator::ipw, nullptr,
                       {config.train_fraction, seed});
  } else if (method == "hcpi_t" || method == "hcpi_ci") {
    outcome = hcpi(data, cell.policies, baseline, config.delta,
                   method == "hcpi_t" ? HcpiVariant::t_test : HcpiVariant::clipped_ci,
                   {config.train_fraction, seed, std::nullopt});
  } else if (method == "ewm_plain") {
    outcome.policy = ewm(data, cell.policies, Estimator::ipw);
    outcome.accepted = true;
  } else {
    throw InputError("unknown method '" + method + "'");
  }
  r.accepted = outcome.accepted;
  r.true_value_gain = binary_gain(cell, cell.truth.labels(outcome.policy));
  if (outcome.accepted && outcome.source)
    r.abstention_rate = TruthSample::abstention_rate(cell.truth.labels(*outcome.source));
  return r;
}

NuisanceModel independent_nuisance(const Cell& cell, std::size_t n, std::uint64_t key,
                                   std::uint64_t replication) {
  DgpSpec aux = cell.spec;
  aux.seed = hash_combine(key, tag_of("nuisance-sample"));
  const auto generated = generate(aux, n, replication);
  auto model = fit_nuisance(generated.data, NuisanceMethod::histogram);
  const double err = estimate_err_dr(model, cell.oracle, 20000, replication);
  return model.with_err_dr(err);
}

ReplicationResult run_abstention_method(const ExperimentConfig& config, const Cell& cell,
                                        const std::string& method, const Dataset& data,
                                        double bonus, std::uint64_t seed, std::uint64_t key,
                                        std::uint64_t replication) {
  ReplicationResult r;
  r.accepted = true;
  LearnerConfig learner;
  learner.bonus = bonus;
  learner.delta = config.delta;
  learner.radius_constant = config.radius_constant;
  learner.seed = seed;
  double value = 0.0;
  if (method == "abstain" || method == "abstain_dr") {
    std::optional<NuisanceModel> nuisance;
    if (method == "abstain_dr") {
      nuisance = independent_nuisance(cell, data.size(), key, replication);
      learner.dr_mode = true;
    }
    const auto fit =
        learn_abstaining(data, cell.policies, learner, nuisance ? &*nuisance : nullptr);
    const auto labels = cell.truth.labels(fit.result);
    value = cell.truth.value(labels, bonus);
    r.abstention_rate = TruthSample::abstention_rate(labels);
  } else if (method == "ewm_plain") {
    value = cell.truth.value(ewm(data, cell.policies, Estimator::ipw));
  } else if (method == "margin_oracle") {
    MarginConfig mc;
    mc.margin = cell.spec.margin;
    mc.mode = MarginMode::cate_oracle;
    mc.learner = learner;
    const auto oracle = noisy_cate_oracle(cell.oracle, 1.0, data.size(), 0.5, seed);
    const auto fit = margin_learn(data, cell.policies, mc, oracle);
    value = cell.truth.value(fit.policy);
  } else {
    throw InputError("unknown method '" + method + "'");
  }
  r.true_value_gain = value - cell.best_in_class;
  return r;
}

ReplicationResult run_robust_method(const ExperimentConfig& config, const Cell& cell,
                                    const Dataset& data, double radius, std::uint64_t seed) {
  ReplicationResult r;
  r.accepted = true;
  LearnerConfig learner;
  learner.bonus = radius / 2.0;
  learner.delta = config.delta;
  learner.radius_constant = config.radius_constant;
  learner.seed = seed;
  const auto fit = learn_abstaining(data, cell.policies, learner);
  const auto labels = cell.truth.labels(fit.result);
  const auto base = cell.truth.labels(fit.pi_hat);
  std::vector<RandomizedAction> learned(labels.size());
  std::vector<RandomizedAction> reference(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    learned[i] = static_cast<RandomizedAction>(labels[i]);
    reference[i] = static_cast<RandomizedAction>(base[i]);
  }
  const ConditionalMeans means{{}, cell.truth.mu0(), cell.truth.mu1()};
  const auto check = check_shift_equivalence(learned, means, radius);
  r.true_value_gain = check.lhs - worst_case_value(reference, means, radius);
  r.identity_gap = check.gap;
  r.abstention_rate = TruthSample::abstention_rate(labels);
  return r;
}

ReplicationResult run_in_cell(const ExperimentConfig& config, const Cell& cell,
                              const std::string& method, std::size_t n, double sweep_value,
                              std::uint64_t replication) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t key = cell_key(config, n, sweep_value);
  DgpSpec spec = cell.spec;
  spec.seed = key;
  const auto generated = generate(spec, n, replication);
  const std::uint64_t seed = hash_combine(key, replication);

  ReplicationResult r;
  switch (config.scenario) {
    case Scenario::spi_noise_sweep:
    case Scenario::spi_gap_sweep:
      r = run_spi_method(config, cell, method, generated.data, seed);
      break;
    case Scenario::abstention_sweep:
    case Scenario::rate_check:
      r = run_abstention_method(config, cell, method, generated.data, sweep_value, seed, key,
                                replication);
      break;
    case Scenario::robust_check:
      r = run_robust_method(config, cell, generated.data, sweep_value, seed);
      break;
  }
  r.method = method;
  r.n = n;
  r.sweep_value = sweep_value;
  r.seed = replication;
  r.mistake = r.true_value_gain < 0.0;
  r.improvement = r.true_value_gain > 0.0;
  r.wallclock_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

[[noreturn]] void rethrow_with_context(std::exception_ptr error, const std::string& context) {
  try {
    std::rethrow_exception(error);
  } catch (const IoError& e) {
    throw IoError(context + ": " + e.what());
  } catch (const CapacityError& e) {
    throw CapacityError(context + ": " + e.what());
  } catch (const PreconditionError& e) {
    throw PreconditionError(context + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(context + ": " + e.what());
  } catch (const FittingError& e) {
    throw FittingError(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(context + ": " + e.what());
  }
}

}  // namespace

ReplicationResult run_replication(const ExperimentConfig& config, const std::string& method,
                                  std::size_t n, double sweep_value, std::uint64_t replication) {
  config.validate();
  const Cell cell = make_cell(config, sweep_value);
  return run_in_cell(config, cell, method, n, sweep_value, replication);
}

std::vector<ReplicationResult> run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<std::string> methods = config.methods;
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  std::vector<std::size_t> n_grid = config.n_grid;
  std::sort(n_grid.begin(), n_grid.end());
  n_grid.erase(std::unique(n_grid.begin(), n_grid.end()), n_grid.end());
  std::vector<double> sweep = config.sweep_values;
  std::sort(sweep.begin(), sweep.end());
  sweep.erase(std::unique(sweep.begin(), sweep.end()), sweep.end());

  std::vector<Cell> cells;
  cells.reserve(sweep.size());
  for (double v : sweep) cells.push_back(make_cell(config, v));

  struct Task {
    std::size_t method, n, sweep;
    std::uint64_t rep;
  };
  // Canonical order: method, n, sweep value, replication.
  std::vector<Task> tasks;
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (std::size_t a = 0; a < n_grid.size(); ++a)
      for (std::size_t s = 0; s < sweep.size(); ++s)
        for (std::uint64_t r = 0; r < config.replications; ++r) tasks.push_back({m, a, s, r});

  std::vector<ReplicationResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::string error_context;
  std::mutex error_mutex;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      const auto& task = tasks[t];
      try {
        results[t] = run_in_cell(config, cells[task.sweep], methods[task.method], n_grid[task.n],
                                 sweep[task.sweep], task.rep);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!failed.exchange(true)) {
          error = std::current_exception();
          error_context = "method " + methods[task.method] + ", n " +
                          std::to_string(n_grid[task.n]) + ", sweep value " +
                          format_double(sweep[task.sweep]) + ", seed " + std::to_string(task.rep);
        }
      }
    }
  };

  std::size_t threads = config.threads ? config.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(tasks.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failed) rethrow_with_context(error, error_context);
  return results;
}

std::vector<AggregateRow> aggregate(const std::vector<ReplicationResult>& results) {
  std::vector<const ReplicationResult*> sorted;
  sorted.reserve(results.size());
  for (const auto& r : results) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return std::tie(a->method, a->n, a->sweep_value, a->seed) <
           std::tie(b->method, b->n, b->sweep_value, b->seed);
  });

  std::vector<AggregateRow> rows;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    const auto& head = *sorted[i];
    while (j < sorted.size() && sorted[j]->method == head.method && sorted[j]->n == head.n &&
           sorted[j]->sweep_value == head.sweep_value)
      ++j;
    AggregateRow row;
    row.method = head.method;
    row.n = head.n;
    row.sweep_value = head.sweep_value;
    row.reps = j - i;
    std::size_t mistakes = 0;
    std::size_t improvements = 0;
    double gain = 0.0;
    double abstention = 0.0;
    for (std::size_t k = i; k < j; ++k) {
      gain += sorted[k]->true_value_gain;
      abstention += sorted[k]->abstention_rate;
      mistakes += sorted[k]->mistake ? 1 : 0;
      improvements += sorted[k]->improvement ? 1 : 0;
    }
    const auto reps = static_cast<double>(row.reps);
    row.mean_gain = gain / reps;
    row.mean_abstention = abstention / reps;
    row.mistake_rate = static_cast<double>(mistakes) / reps;
    row.improvement_rate = static_cast<double>(improvements) / reps;
    if (row.reps > 1) {
      double ss = 0.0;
      for (std::size_t k = i; k < j; ++k) {
        const double d = sorted[k]->true_value_gain - row.mean_gain;
        ss += d * d;
      }
      row.se_gain = std::sqrt(ss / (reps - 1.0)) / std::sqrt(reps);
    }
    rows.push_back(row);
    i = j;
  }
  return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "method,n,sweep_value,mean_gain,se_gain,mistake_rate,improvement_rate,mean_abstention,"
         "reps\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.n << ',' << format_double(r.sweep_value) << ','
        << format_double(r.mean_gain) << ',' << format_double(r.se_gain) << ','
        << format_double(r.mistake_rate) << ',' << format_double(r.improvement_rate) << ','
        << format_double(r.mean_abstention) << ',' << r.reps << '\n';
}

void write_replications_csv(std::ostream& out, const std::vector<ReplicationResult>& results) {
  out << "method,n,sweep_value,seed,true_value_gain,mistake,improvement,abstention_rate,accepted,"
         "identity_gap\n";
  for (const auto& r : results)
    out << r.method << ',' << r.n << ',' << format_double(r.sweep_value) << ',' << r.seed << ','
        << format_double(r.true_value_gain) << ',' << r.mistake << ',' << r.improvement << ','
        << format_double(r.abstention_rate) << ',' << r.accepted << ','
        << format_double(r.identity_gap) << '\n';
}

}  // namespace abstain
