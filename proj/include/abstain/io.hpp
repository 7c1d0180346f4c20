#ifndef ABSTAIN_IO_HPP
#define ABSTAIN_IO_HPP

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "abstain/core.hpp"
#include "abstain/learner.hpp"
#include "abstain/safe.hpp"

namespace abstain {

using Json = nlohmann::json;

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

Json policy_to_json(const BinaryPolicy& policy);
/// Inverse of policy_to_json. Callable policies are not reconstructible and raise InputError.
BinaryPolicy policy_from_json(const Json& j);

Json abstaining_to_json(const AbstainingPolicy& policy);
AbstainingPolicy abstaining_from_json(const Json& j);

Json fit_to_json(const AbstentionFit& fit);
Json outcome_to_json(const SpiOutcome& outcome);

/// Header x0,...,x{dim-1},d,y[,prop]. The prop column is written only when every sample
/// carries a propensity.
void write_dataset_csv(std::ostream& out, const Dataset& data);
/// Errors name the file row (the header is row 1) and the column.
Dataset read_dataset_csv(std::istream& in, double kappa, bool bounded_outcomes = false);

void save_dataset_csv(const std::string& path, const Dataset& data);
Dataset load_dataset_csv(const std::string& path, double kappa, bool bounded_outcomes = false);

/// Rows bonus,lcb,accepted; bonus is empty for single-candidate methods.
void write_lcb_trace_csv(std::ostream& out, const SpiOutcome& outcome);

Json load_json(const std::string& path);
void save_text(const std::string& path, const std::string& text);

}  // namespace abstain

#endif  // ABSTAIN_IO_HPP
