// Command-line front end: simulate, learn, spi, margin, robust-check, experiment.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "abstain/harness.hpp"
#include "abstain/io.hpp"
#include "abstain/margin.hpp"
#include "abstain/robust.hpp"
#include "abstain/safe.hpp"

namespace {

using namespace abstain;

constexpr int kExitInput = 2;
constexpr int kExitIo = 3;

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw IoError("failed writing to stdout");
  } else {
    save_text(path, text);
  }
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw InputError("--grid entry '" + cell + "' is not a number");
    }
  }
  if (out.empty()) throw InputError("--grid is empty");
  return out;
}

PolicyClass class_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("policies") || !j.at("policies").is_array())
    throw InputError("policy class JSON needs a 'policies' array");
  std::vector<BinaryPolicy> policies;
  for (const auto& p : j.at("policies")) policies.push_back(policy_from_json(p));
  return PolicyClass(std::move(policies), j.value("vc_dim", 1));
}

struct ClassOptions {
  std::string class_path;
  std::string preset = "abstention";
};

void add_class_options(CLI::App* cmd, ClassOptions& o) {
  cmd->add_option("--class", o.class_path, "Policy class JSON {vc_dim, policies}");
  cmd->add_option("--preset", o.preset, "Built-in class when --class is absent")
      ->check(CLI::IsMember({"spi", "abstention"}));
}

PolicyClass resolve_class(const ClassOptions& o, const Dataset& data) {
  if (!o.class_path.empty()) return class_from_json(load_json(o.class_path));
  DgpSpec spec;
  spec.family = parse_family(o.preset);
  spec.dim = data.dim();
  return default_policy_class(spec);
}

struct DataOptions {
  std::string path;
  double kappa = 0.1;
  bool bounded = false;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("--data", o.path, "Dataset CSV")->required();
  cmd->add_option("--kappa", o.kappa, "Declared overlap bound");
  cmd->add_flag("--bounded", o.bounded, "Outcomes lie in [0,1]");
}

struct NuisanceOptions {
  std::string path;
  std::string method = "histogram";
  std::optional<double> err_dr;
};

void add_nuisance_options(CLI::App* cmd, NuisanceOptions& o) {
  cmd->add_option("--nuisance-data", o.path, "Independent sample for fitting nuisances");
  cmd->add_option("--nuisance-method", o.method)
      ->check(CLI::IsMember({"histogram", "logistic_irls", "knn"}));
  cmd->add_option("--err-dr", o.err_dr, "Asserted bound on the nuisance product error");
}

std::optional<NuisanceModel> resolve_nuisance(const NuisanceOptions& o, double kappa) {
  if (o.path.empty()) return std::nullopt;
  const auto data = load_dataset_csv(o.path, kappa);
  auto model = fit_nuisance(data, parse_nuisance_method(o.method));
  if (o.err_dr) model = model.with_err_dr(*o.err_dr);
  return model;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy learning with abstention"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  double delta = 0.05;
  double bonus = 0.05;
  std::string grid;
  std::string out;

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Draw a synthetic dataset as CSV");
  DgpSpec sim_spec;
  std::string family = "spi", regime = "complex", propensity = "constant";
  std::size_t sim_n = 1000;
  std::uint64_t replication = 0;
  simulate->add_option("--family", family)->check(CLI::IsMember({"spi", "abstention"}));
  simulate->add_option("--regime", regime)
      ->check(CLI::IsMember({"linear", "nonlinear", "complex", "hard_margin"}));
  simulate->add_option("--propensity", propensity)->check(CLI::IsMember({"constant", "logistic"}));
  simulate->add_option("-n,--n", sim_n)->check(CLI::PositiveNumber);
  simulate->add_option("--dim", sim_spec.dim);
  simulate->add_option("--sigma", sim_spec.noise_sigma);
  simulate->add_option("--gap", sim_spec.baseline_gap);
  simulate->add_option("--margin", sim_spec.margin);
  simulate->add_option("--support-points", sim_spec.support_points);
  simulate->add_option("--kappa", sim_spec.kappa);
  simulate->add_option("--replication", replication);
  simulate->add_option("--seed", seed);
  simulate->add_option("--out", out);

  // learn
  auto* learn = app.add_subcommand("learn", "Two-stage abstention learner");
  DataOptions learn_data;
  ClassOptions learn_class;
  NuisanceOptions learn_nuisance;
  double radius_constant = 1.0;
  bool dr = false;
  add_data_options(learn, learn_data);
  add_class_options(learn, learn_class);
  add_nuisance_options(learn, learn_nuisance);
  learn->add_option("--bonus", bonus);
  learn->add_option("--delta", delta);
  learn->add_option("--seed", seed);
  learn->add_option("--radius-constant", radius_constant);
  learn->add_flag("--dr", dr, "Doubly-robust objective (needs --nuisance-data)");
  learn->add_option("--out", out);

  // spi
  auto* spi = app.add_subcommand("spi", "Safe policy improvement against a baseline");
  DataOptions spi_data;
  ClassOptions spi_class;
  NuisanceOptions spi_nuisance;
  std::string baseline_path, trace_path;
  double train_fraction = 0.5;
  add_data_options(spi, spi_data);
  add_class_options(spi, spi_class);
  add_nuisance_options(spi, spi_nuisance);
  spi->add_option("--baseline", baseline_path, "Baseline policy JSON")->required();
  spi->add_option("--grid", grid, "Comma-separated ascending bonus grid");
  spi->add_option("--delta", delta);
  spi->add_option("--seed", seed);
  spi->add_option("--train-fraction", train_fraction);
  spi->add_flag("--dr", dr);
  spi->add_option("--trace", trace_path, "Write the LCB trace as CSV");
  spi->add_option("--out", out);

  // margin
  auto* margin = app.add_subcommand("margin", "Margin wrapper: abstain, then resolve");
  DataOptions margin_data;
  ClassOptions margin_class;
  NuisanceOptions margin_nuisance;
  double h = 0.2;
  std::string mode = "finite_d";
  std::size_t cap = 12;
  add_data_options(margin, margin_data);
  add_class_options(margin, margin_class);
  add_nuisance_options(margin, margin_nuisance);
  margin->add_option("--margin", h, "Margin h");
  margin->add_option("--mode", mode, "finite_d, or cate_oracle with tau fitted on --nuisance-data")
      ->check(CLI::IsMember({"finite_d", "cate_oracle"}));
  margin->add_option("--cap", cap, "Maximum distinct points enumerated");
  margin->add_option("--delta", delta);
  margin->add_option("--seed", seed);
  margin->add_option("--out", out);

  // robust-check
  auto* robust = app.add_subcommand("robust-check", "Worst-case value identity sweep");
  std::size_t instances = 1000, points = 50;
  robust->add_option("--instances", instances);
  robust->add_option("--points", points);
  robust->add_option("--grid", grid, "Comma-separated shift radii");
  robust->add_option("--seed", seed);
  robust->add_option("--out", out);

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Seeded replication sweep from JSON config");
  std::string config_path, replications_out;
  std::optional<std::size_t> reps, threads;
  std::optional<std::uint64_t> exp_seed;
  std::optional<double> exp_delta;
  experiment->add_option("--config", config_path)->required();
  experiment->add_option("--seed", exp_seed);
  experiment->add_option("--delta", exp_delta);
  experiment->add_option("--grid", grid, "Bonus grid override");
  experiment->add_option("--reps", reps);
  experiment->add_option("--threads", threads);
  experiment->add_option("--replications-out", replications_out);
  experiment->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*simulate) {
      sim_spec.family = parse_family(family);
      sim_spec.reward_regime = parse_regime(regime);
      sim_spec.propensity_kind = parse_propensity_kind(propensity);
      sim_spec.seed = seed;
      const auto generated = generate(sim_spec, sim_n, replication);
      std::ostringstream ss;
      write_dataset_csv(ss, generated.data);
      emit(out, ss.str());
    } else if (*learn) {
      const auto data = load_dataset_csv(learn_data.path, learn_data.kappa, learn_data.bounded);
      const auto policies = resolve_class(learn_class, data);
      const auto nuisance = resolve_nuisance(learn_nuisance, learn_data.kappa);
      LearnerConfig config;
      config.bonus = bonus;
      config.delta = delta;
      config.seed = seed;
      config.radius_constant = radius_constant;
      config.dr_mode = dr;
      const auto fit = learn_abstaining(data, policies, config, nuisance ? &*nuisance : nullptr);
      emit(out, fit_to_json(fit).dump(2) + "\n");
    } else if (*spi) {
      const auto data = load_dataset_csv(spi_data.path, spi_data.kappa, spi_data.bounded);
      const auto policies = resolve_class(spi_class, data);
      const auto nuisance = resolve_nuisance(spi_nuisance, spi_data.kappa);
      const auto baseline = policy_from_json(load_json(baseline_path));
      SpiConfig config;
      if (!grid.empty()) config.bonus_grid = parse_grid(grid);
      config.delta = delta;
      config.learner.delta = delta;
      config.seed = seed;
      config.learner.seed = seed;
      config.train_fraction = train_fraction;
      config.estimator = dr ? Estimator::dr : Estimator::ipw;
      const auto outcome = safe_policy_improvement(data, policies, baseline, config,
                                                   nuisance ? &*nuisance : nullptr);
      if (!trace_path.empty()) {
        std::ostringstream ss;
        write_lcb_trace_csv(ss, outcome);
        save_text(trace_path, ss.str());
      }
      emit(out, outcome_to_json(outcome).dump(2) + "\n");
    } else if (*margin) {
      const auto data = load_dataset_csv(margin_data.path, margin_data.kappa, margin_data.bounded);
      const auto policies = resolve_class(margin_class, data);
      const auto nuisance = resolve_nuisance(margin_nuisance, margin_data.kappa);
      MarginConfig config;
      config.margin = h;
      config.mode = mode == "finite_d" ? MarginMode::finite_d : MarginMode::cate_oracle;
      config.finite_d_cap = cap;
      config.learner.delta = delta;
      config.learner.seed = seed;
      CateOracle oracle;
      if (config.mode == MarginMode::cate_oracle) {
        if (!nuisance) throw PreconditionError("cate_oracle mode needs --nuisance-data");
        oracle = [m = *nuisance](Covariates x) { return m.g(1, x) - m.g(0, x); };
      }
      const auto fit = margin_learn(data, policies, config, oracle);
      Json j{{"policy", policy_to_json(fit.policy)},
             {"abstention", fit_to_json(fit.abstention)},
             {"refine_points", fit.refine_points},
             {"refine_labels", fit.refine_labels},
             {"refine_value", fit.refine_value},
             {"labelings_evaluated", fit.labelings_evaluated}};
      emit(out, j.dump(2) + "\n");
    } else if (*robust) {
      const auto radii = grid.empty() ? std::vector<double>{0.05, 0.1, 0.5} : parse_grid(grid);
      if (points < 1) throw InputError("--points must be >= 1");
      CounterRng rng(seed, 0, "robust-check");
      double max_gap = 0.0;
      for (std::size_t t = 0; t < instances; ++t) {
        ConditionalMeans means;
        std::vector<RandomizedAction> actions;
        for (std::size_t i = 0; i < points; ++i) {
          means.mu0.push_back(rng.uniform());
          means.mu1.push_back(rng.uniform());
          actions.push_back(static_cast<RandomizedAction>(rng.below(3)));
        }
        const double r = radii[t % radii.size()];
        max_gap = std::max(max_gap, check_shift_equivalence(actions, means, r).gap);
      }
      Json j{{"instances", instances}, {"points", points}, {"radii", radii}, {"max_gap", max_gap}};
      emit(out, j.dump(2) + "\n");
    } else if (*experiment) {
      Json j = load_json(config_path);
      if (exp_seed) j["dgp"]["seed"] = *exp_seed;
      if (exp_delta) j["delta"] = *exp_delta;
      if (!grid.empty()) j["bonus_grid"] = parse_grid(grid);
      if (reps) j["replications"] = *reps;
      if (threads) j["threads"] = *threads;
      if (!out.empty()) j["output_path"] = out;
      if (!replications_out.empty()) j["replications_path"] = replications_out;
      const auto config = config_from_json(j);
      const auto results = run_experiment(config);
      std::ostringstream agg;
      write_aggregate_csv(agg, aggregate(results));
      emit(config.output_path, agg.str());
      if (!config.replications_path.empty()) {
        std::ostringstream per;
        write_replications_csv(per, results);
        save_text(config.replications_path, per.str());
      }
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
