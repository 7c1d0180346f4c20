#include "abstain/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace abstain {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw InputError(std::string("policy JSON is missing field '") + key + "'");
  return j.at(key);
}

template <typename T>
T get_as(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("policy JSON field '") + key + "': " + e.what());
  }
}

std::shared_ptr<const BinaryPolicy> shared_from(const Json& j) {
  return std::make_shared<const BinaryPolicy>(policy_from_json(j));
}

}  // namespace

Json policy_to_json(const BinaryPolicy& policy) {
  return std::visit(
      [](const auto& r) -> Json {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, AxisThreshold>) {
          return {{"kind", "axis"}, {"feature", r.feature}, {"threshold", r.threshold},
                  {"greater", r.greater}};
        } else if constexpr (std::is_same_v<R, LinearThreshold>) {
          return {{"kind", "linear"}, {"weights", r.weights}, {"intercept", r.intercept}};
        } else if constexpr (std::is_same_v<R, TablePolicy>) {
          Json entries = Json::array();
          for (const auto& [x, label] : r.labels) entries.push_back({{"x", x}, {"label", label}});
          Json j{{"kind", "table"}, {"entries", entries}, {"default_label", r.default_label}};
          if (r.fallback) j["fallback"] = policy_to_json(*r.fallback);
          return j;
        } else if constexpr (std::is_same_v<R, ConstantPolicy>) {
          return {{"kind", "constant"}, {"label", r.label}};
        } else if constexpr (std::is_same_v<R, SplicePolicy>) {
          return {{"kind", "splice"},
                  {"base", policy_to_json(*r.base)},
                  {"member", policy_to_json(*r.member)},
                  {"fill", policy_to_json(*r.fill)}};
        } else {
          return {{"kind", "callable"}, {"name", r.name}};
        }
      },
      policy.rule());
}

BinaryPolicy policy_from_json(const Json& j) {
  const auto kind = get_as<std::string>(j, "kind");
  if (kind == "axis") {
    const auto feature = get_as<long long>(j, "feature");
    if (feature < 0) throw InputError("axis feature must be >= 0");
    return BinaryPolicy(AxisThreshold{static_cast<std::size_t>(feature),
                                      get_as<double>(j, "threshold"),
                                      j.contains("greater") ? get_as<bool>(j, "greater") : true});
  }
  if (kind == "linear")
    return BinaryPolicy(LinearThreshold{get_as<std::vector<double>>(j, "weights"),
                                        get_as<double>(j, "intercept")});
  if (kind == "constant") return BinaryPolicy(ConstantPolicy{get_as<int>(j, "label")});
  if (kind == "table") {
    TablePolicy t;
    t.default_label = j.contains("default_label") ? get_as<int>(j, "default_label") : 0;
    for (const auto& e : field(j, "entries"))
      t.labels.emplace(get_as<std::vector<double>>(e, "x"), get_as<int>(e, "label"));
    if (j.contains("fallback") && !j.at("fallback").is_null())
      t.fallback = shared_from(j.at("fallback"));
    return BinaryPolicy(std::move(t));
  }
  if (kind == "splice")
    return BinaryPolicy(SplicePolicy{shared_from(field(j, "base")), shared_from(field(j, "member")),
                                     shared_from(field(j, "fill"))});
  if (kind == "callable")
    throw InputError("callable policy '" + j.value("name", std::string{}) +
                     "' cannot be reconstructed from JSON");
  throw InputError("unknown policy kind '" + kind + "'");
}

Json abstaining_to_json(const AbstainingPolicy& policy) {
  return {{"kind", "abstaining"},
          {"base", policy_to_json(policy.base())},
          {"member", policy_to_json(policy.member())}};
}

AbstainingPolicy abstaining_from_json(const Json& j) {
  return AbstainingPolicy(policy_from_json(field(j, "base")), policy_from_json(field(j, "member")));
}

Json fit_to_json(const AbstentionFit& fit) {
  Json near = Json::array();
  for (const auto& p : fit.near_optimal) near.push_back(policy_to_json(p));
  const auto& d = fit.diagnostics;
  return {{"pi_hat", policy_to_json(fit.pi_hat)},
          {"near_optimal", near},
          {"result", abstaining_to_json(fit.result)},
          {"diagnostics",
           {{"alpha", d.alpha},
            {"near_optimal_size", d.near_optimal_size},
            {"candidate_count", d.candidate_count},
            {"abstention_fraction", d.abstention_fraction},
            {"first_stage_value", d.first_stage_value},
            {"second_stage_value", d.second_stage_value}}}};
}

Json outcome_to_json(const SpiOutcome& outcome) {
  Json trace = Json::array();
  for (const auto& r : outcome.lcb_trace)
    trace.push_back({{"bonus", r.bonus ? Json(*r.bonus) : Json(nullptr)}, {"lcb", r.lcb}});
  Json j{{"accepted", outcome.accepted},
         {"policy", policy_to_json(outcome.policy)},
         {"accepted_bonus", outcome.accepted_bonus ? Json(*outcome.accepted_bonus) : Json(nullptr)},
         {"lcb_trace", trace}};
  j["source"] = outcome.source ? abstaining_to_json(*outcome.source) : Json(nullptr);
  return j;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const bool prop = !data.empty() && data.has_propensities();
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
  out << "d,y" << (prop ? ",prop" : "") << '\n';
  for (const auto& s : data.samples()) {
    for (double v : s.x) out << format_double(v) << ',';
    out << s.d << ',' << format_double(s.y);
    if (prop) out << ',' << format_double(*s.propensity);
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  if (first < last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || first == last || !std::isfinite(v))
    throw InputError("row " + std::to_string(row) + ", column " + column + ": '" + text +
                     "' is not a finite number");
  return v;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in, double kappa, bool bounded_outcomes) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("dataset CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  bool prop = !header.empty() && header.back() == "prop";
  const std::size_t tail = prop ? 3 : 2;
  if (header.size() < tail + 1) throw InputError("dataset CSV header has no covariate columns");
  const std::size_t dim = header.size() - tail;
  for (std::size_t j = 0; j < dim; ++j)
    if (header[j] != "x" + std::to_string(j))
      throw InputError("dataset CSV header: expected x" + std::to_string(j) + ", got '" +
                       header[j] + "'");
  if (header[dim] != "d" || header[dim + 1] != "y")
    throw InputError("dataset CSV header must end with d,y[,prop]");

  std::vector<Sample> samples;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw InputError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " fields, expected " + std::to_string(header.size()));
    Sample s;
    s.x.reserve(dim);
    for (std::size_t j = 0; j < dim; ++j) s.x.push_back(parse_number(cells[j], row, header[j]));
    const double d = parse_number(cells[dim], row, "d");
    if (d != 0.0 && d != 1.0)
      throw InputError("row " + std::to_string(row) + ": d must be 0 or 1");
    s.d = static_cast<int>(d);
    s.y = parse_number(cells[dim + 1], row, "y");
    if (prop) s.propensity = parse_number(cells[dim + 2], row, "prop");
    samples.push_back(std::move(s));
  }
  if (in.bad()) throw IoError("failed while reading dataset CSV");
  return Dataset(std::move(samples), kappa, dim, bounded_outcomes);
}

void save_dataset_csv(const std::string& path, const Dataset& data) {
  std::ostringstream ss;
  write_dataset_csv(ss, data);
  save_text(path, ss.str());
}

Dataset load_dataset_csv(const std::string& path, double kappa, bool bounded_outcomes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_dataset_csv(in, kappa, bounded_outcomes);
}

void write_lcb_trace_csv(std::ostream& out, const SpiOutcome& outcome) {
  out << "bonus,lcb,accepted\n";
  for (const auto& r : outcome.lcb_trace) {
    if (r.bonus) out << format_double(*r.bonus);
    out << ',' << format_double(r.lcb) << ',' << (r.lcb > 0.0 ? 1 : 0) << '\n';
  }
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace abstain
