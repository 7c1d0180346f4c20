#ifndef ABSTAIN_HARNESS_HPP
#define ABSTAIN_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "abstain/dgp.hpp"
#include "abstain/io.hpp"

namespace abstain {

enum class Scenario { spi_noise_sweep, spi_gap_sweep, abstention_sweep, rate_check, robust_check };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& s);

/// Methods understood by the harness. The spi scenarios run algo2, safe_ewm, hcpi_t, hcpi_ci
/// and ewm_plain; the abstention scenarios run abstain, abstain_dr, margin_oracle and
/// ewm_plain.
const std::vector<std::string>& known_methods(Scenario s);

struct ExperimentConfig {
  Scenario scenario = Scenario::spi_noise_sweep;
  DgpSpec dgp;
  std::vector<std::size_t> n_grid{1000};
  /// Meaning depends on the scenario: noise sigma, baseline gap, abstention bonus, or shift
  /// radius (robust_check).
  std::vector<double> sweep_values{0.3};
  std::size_t replications = 100;
  double delta = 0.05;
  std::vector<std::string> methods;
  std::string output_path;
  /// Optional per-replication CSV.
  std::string replications_path;

  std::vector<double> bonus_grid{0.0, 0.01, 0.05, 0.10, 0.20};
  double radius_constant = 1.0;
  double train_fraction = 0.5;
  /// Size of the common covariate sample used as ground truth.
  std::size_t truth_size = 100000;
  /// 0 means one worker per hardware thread.
  std::size_t threads = 0;

  void validate() const;
};

/// Defaults for a scenario; fields present in `j` override them.
ExperimentConfig config_from_json(const Json& j);

struct ReplicationResult {
  std::string method;
  std::size_t n = 0;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;  // replication index
  double true_value_gain = 0.0;
  bool mistake = false;
  bool improvement = false;
  double abstention_rate = 0.0;
  bool accepted = false;
  double wallclock_ms = 0.0;
  /// robust_check only: |worst-case value - (V^(r/2) - r)| for the learned policy.
  double identity_gap = 0.0;
};

/// Runs every (method, n, sweep value, replication) cell. The returned list is sorted by
/// method name, n, sweep value, and replication, independent of completion order.
std::vector<ReplicationResult> run_experiment(const ExperimentConfig& config);

/// One replication of one method, for tests and for the pool.
ReplicationResult run_replication(const ExperimentConfig& config, const std::string& method,
                                  std::size_t n, double sweep_value, std::uint64_t replication);

struct AggregateRow {
  std::string method;
  std::size_t n = 0;
  double sweep_value = 0.0;
  double mean_gain = 0.0;
  double se_gain = 0.0;
  double mistake_rate = 0.0;
  double improvement_rate = 0.0;
  double mean_abstention = 0.0;
  std::size_t reps = 0;
};

std::vector<AggregateRow> aggregate(const std::vector<ReplicationResult>& results);

/// Columns method,n,sweep_value,mean_gain,se_gain,mistake_rate,improvement_rate,
/// mean_abstention,reps.
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
/// Per-replication rows without wall-clock time, so reruns stay byte-identical.
void write_replications_csv(std::ostream& out, const std::vector<ReplicationResult>& results);

}  // namespace abstain

#endif  // ABSTAIN_HARNESS_HPP
