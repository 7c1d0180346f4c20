#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "abstain/dgp.hpp"

namespace abstain {

NuisanceMethod parse_nuisance_method(const std::string& s) {
  if (s == "histogram") return NuisanceMethod::histogram;
  if (s == "logistic_irls") return NuisanceMethod::logistic_irls;
  if (s == "knn") return NuisanceMethod::knn;
  throw InputError("unknown nuisance method '" + s + "'");
}

namespace {

struct ArmSplit {
  std::vector<std::size_t> treated;
  std::vector<std::size_t> control;
};

ArmSplit split_arms(const Dataset& data) {
  ArmSplit out;
  for (std::size_t i = 0; i < data.size(); ++i)
    (data[i].d == 1 ? out.treated : out.control).push_back(i);
  if (out.treated.empty() || out.control.empty())
    throw FittingError("nuisance fitting needs samples from both arms");
  return out;
}

double mean_y(const Dataset& data, const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (auto i : idx) s += data[i].y;
  return s / static_cast<double>(idx.size());
}

// Equal-width cells over the first few features.
struct Histogram {
  std::size_t features = 0;
  std::size_t bins = 1;
  std::vector<double> lo, width;
  // cell -> (sum, count) for y per arm and for d
  std::vector<double> y_sum[2], y_count[2], d_sum, count;
  double y_global[2] = {0.0, 0.0};
  double d_global = 0.0;

  std::size_t cell(Covariates x) const {
    std::size_t c = 0;
    for (std::size_t j = 0; j < features; ++j) {
      std::size_t b = 0;
      if (width[j] > 0.0) {
        const double t = (x[j] - lo[j]) / width[j];
        b = t <= 0.0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(t));
      }
      c = c * bins + b;
    }
    return c;
  }

  double g(int arm, Covariates x) const {
    const auto c = cell(x);
    return y_count[arm][c] > 0 ? y_sum[arm][c] / y_count[arm][c] : y_global[arm];
  }
  double p(Covariates x) const {
    const auto c = cell(x);
    return count[c] > 0 ? d_sum[c] / count[c] : d_global;
  }
};

NuisanceModel fit_histogram(const Dataset& data, const NuisanceParams& params) {
  if (params.bins < 1) throw InputError("histogram needs at least one bin");
  const auto arms = split_arms(data);
  auto h = std::make_shared<Histogram>();
  h->features = std::min(params.max_features, data.dim());
  h->bins = params.bins;
  h->lo.assign(h->features, 0.0);
  h->width.assign(h->features, 0.0);
  for (std::size_t j = 0; j < h->features; ++j) {
    double lo = data[0].x[j], hi = lo;
    for (const auto& s : data.samples()) {
      lo = std::min(lo, s.x[j]);
      hi = std::max(hi, s.x[j]);
    }
    h->lo[j] = lo;
    h->width[j] = (hi - lo) / static_cast<double>(params.bins);
  }
  std::size_t cells = 1;
  for (std::size_t j = 0; j < h->features; ++j) cells *= params.bins;
  for (int a = 0; a < 2; ++a) {
    h->y_sum[a].assign(cells, 0.0);
    h->y_count[a].assign(cells, 0.0);
  }
  h->d_sum.assign(cells, 0.0);
  h->count.assign(cells, 0.0);
  for (const auto& s : data.samples()) {
    const auto c = h->cell(s.x);
    h->y_sum[s.d][c] += s.y;
    h->y_count[s.d][c] += 1.0;
    h->d_sum[c] += s.d;
    h->count[c] += 1.0;
  }
  h->y_global[1] = mean_y(data, arms.treated);
  h->y_global[0] = mean_y(data, arms.control);
  h->d_global = static_cast<double>(arms.treated.size()) / static_cast<double>(data.size());
  return NuisanceModel([h](int arm, Covariates x) { return h->g(arm, x); },
                       [h](Covariates x) { return h->p(x); }, data.kappa(), std::nullopt,
                       data.id());
}

Eigen::MatrixXd design(const Dataset& data, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(idx.size()),
                    static_cast<Eigen::Index>(data.dim() + 1));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    X(static_cast<Eigen::Index>(r), 0) = 1.0;
    for (std::size_t j = 0; j < data.dim(); ++j)
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j + 1)) = data[idx[r]].x[j];
  }
  return X;
}

double linear_predict(const Eigen::VectorXd& beta, Covariates x) {
  double s = beta(0);
  for (std::size_t j = 0; j < x.size(); ++j) s += beta(static_cast<Eigen::Index>(j + 1)) * x[j];
  return s;
}

NuisanceModel fit_logistic(const Dataset& data, const NuisanceParams& params) {
  const auto arms = split_arms(data);
  const auto p = static_cast<Eigen::Index>(data.dim() + 1);
  constexpr double ridge = 1e-8;

  Eigen::VectorXd beta_g[2];
  for (int a = 0; a < 2; ++a) {
    const auto& idx = a == 1 ? arms.treated : arms.control;
    const auto X = design(data, idx);
    Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) y(static_cast<Eigen::Index>(r)) = data[idx[r]].y;
    Eigen::MatrixXd gram = X.transpose() * X;
    gram.diagonal().array() += ridge;
    beta_g[a] = gram.ldlt().solve(X.transpose() * y);
  }

  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto X = design(data, all);
  Eigen::VectorXd d(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) d(static_cast<Eigen::Index>(i)) = data[i].d;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (int it = 0; it < params.max_iter; ++it) {
    const Eigen::VectorXd eta = X * beta;
    const Eigen::VectorXd mu = (1.0 + (-eta.array()).exp()).inverse().matrix();
    const Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).max(1e-10).matrix();
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    H.diagonal().array() += ridge;
    const Eigen::VectorXd step = H.ldlt().solve(X.transpose() * (d - mu));
    beta += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }

  return NuisanceModel(
      [b0 = beta_g[0], b1 = beta_g[1]](int arm, Covariates x) {
        return linear_predict(arm == 1 ? b1 : b0, x);
      },
      [beta](Covariates x) { return 1.0 / (1.0 + std::exp(-linear_predict(beta, x))); },
      data.kappa(), std::nullopt, data.id());
}

struct KnnData {
  std::vector<std::vector<double>> x[2];
  std::vector<double> y[2];
  std::vector<std::vector<double>> all_x;
  std::vector<double> all_d;
  std::size_t k = 1;

  static double dist2(Covariates a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
  }

  static double average(Covariates q, const std::vector<std::vector<double>>& xs,
                        const std::vector<double>& vs, std::size_t k) {
    k = std::min(k, xs.size());
    std::vector<std::pair<double, std::size_t>> d(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) d[i] = {dist2(q, xs[i]), i};
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += vs[d[i].second];
    return s / static_cast<double>(k);
  }
};

NuisanceModel fit_knn(const Dataset& data, const NuisanceParams& params) {
  if (params.k < 1) throw InputError("knn needs k >= 1");
  split_arms(data);
  auto m = std::make_shared<KnnData>();
  m->k = params.k;
  for (const auto& s : data.samples()) {
    m->x[s.d].push_back(s.x);
    m->y[s.d].push_back(s.y);
    m->all_x.push_back(s.x);
    m->all_d.push_back(s.d);
  }
  return NuisanceModel(
      [m](int arm, Covariates x) { return KnnData::average(x, m->x[arm], m->y[arm], m->k); },
      [m](Covariates x) { return KnnData::average(x, m->all_x, m->all_d, m->k); }, data.kappa(),
      std::nullopt, data.id());
}

}  // namespace

NuisanceModel fit_nuisance(const Dataset& data, NuisanceMethod method,
                           const NuisanceParams& params) {
  if (data.empty()) throw InputError("fit_nuisance: empty dataset");
  switch (method) {
    case NuisanceMethod::histogram:
      return fit_histogram(data, params);
    case NuisanceMethod::logistic_irls:
      return fit_logistic(data, params);
    case NuisanceMethod::knn:
      return fit_knn(data, params);
  }
  throw InputError("unknown nuisance method");
}

}  // namespace abstain
