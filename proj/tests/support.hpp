#ifndef ABSTAIN_TESTS_SUPPORT_HPP
#define ABSTAIN_TESTS_SUPPORT_HPP

#include <random>
#include <vector>

#include "abstain/core.hpp"

namespace testing {

inline abstain::Sample sample(std::vector<double> x, int d, double y, double p) {
  return abstain::Sample{std::move(x), d, y, p};
}

inline abstain::Dataset dataset(std::vector<abstain::Sample> s, double kappa = 0.1,
                                bool bounded = true) {
  const std::size_t dim = s.empty() ? 1 : s.front().x.size();
  return abstain::Dataset(std::move(s), kappa, dim, bounded);
}

/// Random bounded-outcome dataset with propensities in [kappa, 1 - kappa].
inline abstain::Dataset random_dataset(std::mt19937_64& gen, std::size_t n, std::size_t dim,
                                       double kappa) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> prop(kappa, 1.0 - kappa);
  std::vector<abstain::Sample> s;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(dim);
    for (auto& v : x) v = u(gen);
    const double p = prop(gen);
    s.push_back({x, u(gen) < p ? 1 : 0, u(gen), p});
  }
  return abstain::Dataset(std::move(s), kappa, dim, true);
}

}  // namespace testing

#endif  // ABSTAIN_TESTS_SUPPORT_HPP
