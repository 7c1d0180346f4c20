#include <doctest.h>

#include <cmath>
#include <random>

#include "abstain/dgp.hpp"
#include "abstain/value.hpp"
#include "support.hpp"

using namespace abstain;
using testing::dataset;
using testing::sample;

namespace {

// By-hand IPW term, written out independently of the library.
double ipw_term(int pi, const Sample& s) {
  const double p = *s.propensity;
  return pi * s.y * s.d / p + (1 - pi) * s.y * (1 - s.d) / (1.0 - p);
}

Dataset four_samples() {
  return dataset({sample({0.2}, 1, 0.8, 0.4), sample({0.7}, 0, 0.5, 0.3),
                  sample({0.9}, 1, 0.6, 0.6), sample({0.4}, 0, 0.9, 0.5)});
}

}  // namespace

TEST_CASE("ipw_value single-sample examples") {
  const auto d = dataset({sample({0.0}, 1, 1.0, 0.5)});
  CHECK(ipw_value(BinaryPolicy::constant(1), d).value == 2.0);
  CHECK(ipw_value(BinaryPolicy::constant(0), d).value == 0.0);
}

TEST_CASE("ipw_value matches a by-hand four-term average") {
  // policy 1{x > 0.5}: labels 0, 1, 1, 0
  // terms: 0.5/0.7... computed from the raw formula
  //   s0: d=1, pi=0 -> y(1-d)/(1-p) = 0
  //   s1: d=0, pi=1 -> y d / p = 0
  //   s2: d=1, pi=1 -> 0.6/0.6 = 1
  //   s3: d=0, pi=0 -> 0.9/0.5 = 1.8
  const auto est = ipw_value(BinaryPolicy::axis(0, 0.5), four_samples());
  CHECK(est.value == doctest::Approx((0.0 + 0.0 + 1.0 + 1.8) / 4.0).epsilon(1e-15));
  CHECK(est.n == 4);
  REQUIRE(est.per_unit.size() == 4);
  double sum = 0.0;
  for (double v : est.per_unit) sum += v;
  CHECK(sum / 4.0 == doctest::Approx(est.value).epsilon(1e-15));
}

TEST_CASE("ipw_value errors") {
  const Dataset no_prop({Sample{{0.0}, 1, 1.0, std::nullopt}}, 0.1, 1);
  CHECK_THROWS_AS(ipw_value(BinaryPolicy::constant(1), no_prop), PreconditionError);
  CHECK_THROWS_AS(ipw_value(BinaryPolicy::constant(1), dataset({})), InputError);
}

TEST_CASE("normalized_score examples") {
  CHECK(normalized_score(BinaryPolicy::constant(1), sample({0.0}, 1, 1.0, 0.5), 0.5) == 1.0);
  CHECK(normalized_score(BinaryPolicy::constant(1), sample({0.0}, 1, 0.0, 0.3), 0.1) == 0.0);
  CHECK(normalized_score(BinaryPolicy::constant(0), sample({0.0}, 0, 0.0, 0.3), 0.1) == 0.0);
  CHECK(normalized_score(BinaryPolicy::constant(0), sample({0.0}, 0, 1.0, 0.9), 0.1) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("score_distance examples") {
  const auto d = dataset({sample({0.2}, 1, 0.8, 0.4), sample({0.7}, 0, 0.5, 0.3),
                          sample({0.9}, 1, 0.6, 0.6)});
  const auto a = BinaryPolicy::axis(0, 0.5);
  CHECK(score_distance(a, a, d, 0.1) == 0.0);
  // thresholds 0.5 and 0.6 differ only on (0.5, 0.6], where no sample lies
  CHECK(score_distance(a, BinaryPolicy::axis(0, 0.6), d, 0.1) == 0.0);
  // a vs constant-1 differ at x=0.2 only: |f_1 - f_0| = 0.1 * |0.8/0.4 - 0| = 0.2; mean 0.2/3
  CHECK(score_distance(a, BinaryPolicy::constant(1), d, 0.1) ==
        doctest::Approx(0.2 / 3.0).epsilon(1e-14));
}

TEST_CASE("ipw_value_abstain examples") {
  const auto d = four_samples();
  const auto base = BinaryPolicy::axis(0, 0.5);
  for (double bonus : {0.0, 0.1, 0.7})
    CHECK(ipw_value_abstain(AbstainingPolicy(base, base), d, bonus).value ==
          doctest::Approx(ipw_value(base, d).value).epsilon(1e-15));

  const auto one = dataset({sample({0.0}, 1, 1.0, 0.5)});
  const AbstainingPolicy everywhere(BinaryPolicy::constant(0), BinaryPolicy::constant(1));
  CHECK(ipw_value_abstain(everywhere, one, 0.1).value == doctest::Approx(1.1).epsilon(1e-15));

  // base 1{x>0.5}, member 1{x>0.3}: abstain at x = 0.4 only
  const AbstainingPolicy mixed(base, BinaryPolicy::axis(0, 0.3));
  const auto& s = d.samples();
  const double abstain_term = s[3].y * s[3].d / (2 * *s[3].propensity) +
                              s[3].y * (1 - s[3].d) / (2 * (1 - *s[3].propensity)) + 0.05;
  const double expected =
      (ipw_term(0, s[0]) + ipw_term(1, s[1]) + ipw_term(1, s[2]) + abstain_term) / 4.0;
  CHECK(ipw_value_abstain(mixed, d, 0.05).value == doctest::Approx(expected).epsilon(1e-14));
  CHECK_THROWS_AS(ipw_value_abstain(mixed, d, -0.01), InputError);
}

TEST_CASE("dr_pseudo_outcome examples") {
  const NuisanceModel m([](int a, Covariates) { return a == 1 ? 0.5 : 0.2; },
                        [](Covariates) { return 0.5; }, 0.1);
  const auto s = sample({0.0}, 1, 1.0, 0.5);
  CHECK(dr_pseudo_outcome(m, s, 1) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(dr_pseudo_outcome(m, s, 0) == 0.2);
  CHECK_THROWS_AS(dr_pseudo_outcome(m, s, 2), InputError);

  // exact g, noiseless y: residual vanishes for the realized arm
  auto g = [](int a, Covariates x) { return a == 1 ? 0.3 + x[0] : 0.1; };
  const NuisanceModel exact(g, [](Covariates) { return 0.37; }, 0.1);
  const std::vector<double> x{0.4};
  const auto noiseless = sample({0.4}, 1, g(1, x), 0.5);
  CHECK(dr_pseudo_outcome(exact, noiseless, 1) == doctest::Approx(g(1, x)).epsilon(1e-15));
  CHECK(dr_pseudo_outcome(exact, noiseless, 0) == g(0, x));
}

TEST_CASE("dr_value examples") {
  auto g = [](int a, Covariates x) { return a == 1 ? 0.2 + 0.5 * x[0] : 0.6 - 0.2 * x[0]; };
  const NuisanceModel exact(g, [](Covariates x) { return 0.3 + 0.4 * x[0]; }, 0.1);
  std::vector<Sample> s;
  for (double x : {0.1, 0.35, 0.6, 0.85}) {
    const std::vector<double> xv{x};
    const int d = x > 0.5 ? 1 : 0;
    s.push_back(sample({x}, d, g(d, xv), 0.5));
  }
  const auto data = dataset(s);
  const auto pol = BinaryPolicy::axis(0, 0.5);
  double truth = 0.0;
  for (const auto& smp : s) truth += g(pol.decide(smp.x), smp.x);
  CHECK(dr_value(pol, data, exact).value == doctest::Approx(truth / 4.0).epsilon(1e-14));

  double treat = 0.0;
  for (const auto& smp : s) treat += dr_pseudo_outcome(exact, smp, 1);
  CHECK(dr_value(BinaryPolicy::constant(1), data, exact).value ==
        doctest::Approx(treat / 4.0).epsilon(1e-15));

  // three-sample hand case with constant nuisances g1 = 0.5, g0 = 0.3, p = 0.4
  const NuisanceModel flat([](int a, Covariates) { return a == 1 ? 0.5 : 0.3; },
                           [](Covariates) { return 0.4; }, 0.1);
  const auto hand = dataset({sample({0.2}, 1, 1.0, 0.5), sample({0.7}, 0, 0.6, 0.5),
                             sample({0.9}, 1, 0.2, 0.5)});
  // labels 0, 1, 1
  //   s0 arm 0, d=1: 0.3
  //   s1 arm 1, d=0: 0.5
  //   s2 arm 1, d=1: 0.5 + (0.2 - 0.5)/0.4 = -0.25
  CHECK(dr_value(pol, hand, flat).value == doctest::Approx((0.3 + 0.5 - 0.25) / 3.0));

  const AbstainingPolicy mixed(pol, BinaryPolicy::axis(0, 0.8));
  // abstains at x = 0.7: (phi1 + phi0)/2 + bonus with phi1 = 0.5, phi0 = 0.3 + 0.3/0.6 = 0.8
  CHECK(dr_value_abstain(mixed, hand, flat, 0.1).value ==
        doctest::Approx((0.3 + (0.5 + 0.8) / 2.0 + 0.1 - 0.25) / 3.0));
  CHECK(dr_value_abstain(AbstainingPolicy(pol, pol), hand, flat, 0.3).value ==
        doctest::Approx(dr_value(pol, hand, flat).value).epsilon(1e-15));

  const AbstainingPolicy everywhere(BinaryPolicy::constant(0), BinaryPolicy::constant(1));
  double half = 0.0;
  for (const auto& smp : s) half += (g(0, smp.x) + g(1, smp.x)) / 2.0 + 0.05;
  CHECK(dr_value_abstain(everywhere, data, exact, 0.05).value ==
        doctest::Approx(half / 4.0).epsilon(1e-14));
  CHECK_THROWS_AS(dr_value(pol, dataset({}), flat), InputError);
}

TEST_CASE("quantiles") {
  CHECK(normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK(normal_quantile(0.99) == doctest::Approx(2.3263478740408408).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
  CHECK(student_t_quantile(0.95, 99) == doctest::Approx(1.6603911560169928).epsilon(1e-10));
  CHECK_THROWS_AS(normal_quantile(1.0), InputError);
}

namespace {

/// n values with mean m and Bessel-corrected sd s (n even).
std::vector<double> with_moments(std::size_t n, double m, double s) {
  const double a = s * std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n));
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = m + (i % 2 == 0 ? a : -a);
  return v;
}

}  // namespace

TEST_CASE("lcb examples") {
  const auto d = with_moments(100, 0.2, 1.0);
  CHECK(mean_and_sd(d).sd == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lcb_from_differences(d, 0.05, 1) == doctest::Approx(0.03551).epsilon(1e-4));
  CHECK(lcb_from_differences(d, 0.05, 5) == doctest::Approx(-0.03263).epsilon(1e-4));
  CHECK(t_lcb_from_differences(d, 0.05) == doctest::Approx(0.03396).epsilon(1e-4));

  const std::vector<double> flat(10, 0.0);
  CHECK(lcb_from_differences(flat, 0.05, 3) == 0.0);
  const std::vector<double> one{0.3};
  CHECK_THROWS_AS(lcb_from_differences(one, 0.05, 1), InputError);
  CHECK_THROWS_AS(lcb_from_differences(d, 0.0, 1), InputError);
  CHECK_THROWS_AS(lcb_from_differences(d, 0.05, 0), InputError);
}

TEST_CASE("lcb_difference of a policy against itself is zero") {
  std::mt19937_64 gen(11);
  const auto data = testing::random_dataset(gen, 50, 2, 0.1);
  const auto p = BinaryPolicy::axis(1, 0.4);
  CHECK(lcb_difference(p, p, data, 0.05, 5, Estimator::ipw) == 0.0);
  const NuisanceModel m([](int, Covariates) { return 0.5; }, [](Covariates) { return 0.5; }, 0.1);
  CHECK(lcb_difference(p, p, data, 0.05, 1, Estimator::dr, &m) == 0.0);
  CHECK_THROWS_AS(lcb_difference(p, p, data, 0.05, 1, Estimator::dr), PreconditionError);
}

TEST_CASE("property: normalized scores are bounded in [0,1]") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> kappa_dist(0.01, 0.5);
  int cases = 0;
  for (; cases < 20000; ++cases) {
    const double kappa = kappa_dist(gen);
    const double p = kappa + (1.0 - 2.0 * kappa) * u(gen);
    const Sample s{{u(gen), u(gen)}, u(gen) < 0.5 ? 1 : 0, u(gen), p};
    const auto pol = BinaryPolicy::axis(gen() % 2, u(gen), u(gen) < 0.5);
    const double f = normalized_score(pol, s, kappa);
    REQUIRE(f >= 0.0);
    REQUIRE(f <= 1.0 + 1e-12);
  }
  CHECK(cases >= 10000);
}

TEST_CASE("property: abstention value is linear in the bonus") {
  std::mt19937_64 gen(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto data = testing::random_dataset(gen, 40, 2, 0.1);
  for (int cases = 0; cases < 10000; ++cases) {
    const AbstainingPolicy ap(BinaryPolicy::axis(0, u(gen)),
                              BinaryPolicy::axis(1, u(gen), u(gen) < 0.5));
    const double bonus = u(gen);
    std::size_t abstained = 0;
    for (const auto& s : data.samples()) abstained += ap.abstains(s.x) ? 1 : 0;
    const double frac = static_cast<double>(abstained) / static_cast<double>(data.size());
    const double lhs = ipw_value_abstain(ap, data, bonus).value;
    const double rhs = ipw_value_abstain(ap, data, 0.0).value + bonus * frac;
    REQUIRE(std::abs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("property: LCB decreases in k and increases in delta") {
  std::mt19937_64 gen(23);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int cases = 0; cases < 10000; ++cases) {
    std::vector<double> d(2 + gen() % 30);
    for (auto& v : d) v = z(gen) * (0.1 + u(gen)) + u(gen) - 0.5;
    const double delta = 0.001 + 0.4 * u(gen);
    const int k = 1 + static_cast<int>(gen() % 8);
    const double base = lcb_from_differences(d, delta, k);
    REQUIRE(lcb_from_differences(d, delta, k + 1) < base);
    const double delta2 = delta + (0.99 - delta) * (0.01 + 0.98 * u(gen));
    if (delta2 / k < 1.0) REQUIRE(lcb_from_differences(d, delta2, k) > base);
  }
}

TEST_CASE("Monte-Carlo: IPW value is unbiased and E[f] = kappa V") {
  DgpSpec spec;
  spec.family = DgpFamily::spi;
  spec.propensity_kind = PropensityKind::logistic;
  const Oracle oracle(spec);
  const auto pol = spi_optimal(spec);
  const auto truth = true_value(pol, oracle, 400000, 7);

  const std::size_t reps = 400;
  double sum = 0.0, sum_sq = 0.0, f_sum = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto g = generate(spec, 500, r);
    const double v = ipw_value(pol, g.data).value;
    sum += v;
    sum_sq += v * v;
    for (const auto& s : g.data.samples()) f_sum += normalized_score(pol, s, spec.kappa);
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum_sq / reps - mean * mean) / (reps - 1));
  const double tol = 3.0 * std::sqrt(se * se + truth.standard_error * truth.standard_error);
  CHECK(std::abs(mean - truth.value) <= tol);
  const double f_mean = f_sum / (reps * 500.0);
  CHECK(std::abs(f_mean - spec.kappa * mean) <= 1e-12 + 1e-12 * std::abs(mean));
}

TEST_CASE("Monte-Carlo: DR value is double robust") {
  DgpSpec spec;
  spec.family = DgpFamily::spi;
  spec.propensity_kind = PropensityKind::logistic;
  const Oracle oracle(spec);
  const auto pol = spi_optimal(spec);
  const auto truth = true_value(pol, oracle, 400000, 8);

  // right g, wrong p; wrong g, right p
  const NuisanceModel right_g([oracle](int a, Covariates x) { return oracle.mean_outcome(a, x); },
                              [](Covariates x) { return 0.2 + 0.6 * x[3]; }, 0.1);
  const NuisanceModel right_p([](int a, Covariates x) { return a == 1 ? 0.9 * x[4] : 0.3; },
                              [oracle](Covariates x) { return oracle.propensity(x); }, 0.1);
  for (const auto* m : {&right_g, &right_p}) {
    const std::size_t reps = 300;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto g = generate(spec, 500, 1000 + r);
      const double v = dr_value(pol, g.data, *m).value;
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum_sq / reps - mean * mean) / (reps - 1));
    CHECK(std::abs(mean - truth.value) <=
          3.0 * std::sqrt(se * se + truth.standard_error * truth.standard_error));
  }
}
