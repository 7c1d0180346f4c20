#include <doctest.h>

#include <cmath>

#include "abstain/dgp.hpp"
#include "support.hpp"

using namespace abstain;

namespace {

DgpSpec abstention_spec(RewardRegime regime) {
  DgpSpec spec;
  spec.family = DgpFamily::abstention;
  spec.dim = 2;
  spec.noise_sigma = 0.1;
  spec.propensity_kind = PropensityKind::logistic;
  spec.reward_regime = regime;
  return spec;
}

}  // namespace

TEST_CASE("spi oracle point evaluations") {
  const Oracle o(DgpSpec{});
  CHECK(o.tau(std::vector<double>{0.5, 0.5, 0.2, 0.0, 0.0}) == 0.0);
  CHECK(o.mean_outcome(0, std::vector<double>{0.5, 0.5, 0.2, 0.0, 0.0}) == 0.2);
  CHECK(o.tau(std::vector<double>{1.0, 1.0, 0.0, 0.0, 0.0}) == 2.0);
  CHECK(o.propensity(std::vector<double>{0.9, 0.1, 0.0, 0.0, 0.0}) == 0.5);
}

TEST_CASE("Monte-Carlo truth of the spi family") {
  const DgpSpec spec;
  const Oracle o(spec);
  const auto opt = true_value(spi_optimal(spec), o, 200000, 1);
  const auto zero = true_value(BinaryPolicy::constant(0), o, 200000, 2);
  CHECK(std::abs(opt.value - 5.0 / 6.0) <= 3 * opt.standard_error);
  CHECK(std::abs(zero.value - 0.5) <= 3 * zero.standard_error);
  CHECK(spi_baseline(spec) == spi_optimal(spec));
}

TEST_CASE("generation is reproducible and replications differ") {
  DgpSpec spec;
  spec.seed = 4;
  const auto a = generate(spec, 50, 3).data;
  const auto b = generate(spec, 50, 3).data;
  const auto c = generate(spec, 50, 4).data;
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].y == b[i].y);
    CHECK(a[i].d == b[i].d);
  }
  CHECK(a[0].x != c[0].x);
  // a longer draw extends a shorter one
  const auto longer = generate(spec, 80, 3).data;
  CHECK(longer[49].x == a[49].x);
  CHECK(longer[49].y == a[49].y);
}

TEST_CASE("propensities stay within [kappa, 1 - kappa]") {
  for (auto regime : {RewardRegime::linear, RewardRegime::complex}) {
    const auto g = generate(abstention_spec(regime), 5000, 0);
    for (const auto& s : g.data.samples()) {
      REQUIRE(*s.propensity >= 0.1);
      REQUIRE(*s.propensity <= 0.9);
      REQUIRE(s.y >= 0.0);
      REQUIRE(s.y <= 1.0);
    }
  }
  DgpSpec spi;
  spi.propensity_kind = PropensityKind::logistic;
  for (const auto& s : generate(spi, 2000, 0).data.samples()) {
    REQUIRE(*s.propensity >= 0.1);
    REQUIRE(*s.propensity <= 0.9);
  }
}

TEST_CASE("abstention regimes") {
  const Oracle lin(abstention_spec(RewardRegime::linear));
  CHECK(lin.tau(std::vector<double>{1.0, 2.0}) == doctest::Approx(0.35));
  CHECK(lin.tau(std::vector<double>{3.0, 0.0}) == 0.4);
  const Oracle nl(abstention_spec(RewardRegime::nonlinear));
  CHECK(nl.tau(std::vector<double>{0.5, 0.0}) == doctest::Approx(0.3 * std::sin(1.0)));
  const Oracle cx(abstention_spec(RewardRegime::complex));
  CHECK(cx.tau(std::vector<double>{0.5, 0.0}) == 0.0);
  CHECK(cx.tau(std::vector<double>{-0.6, 0.0}) == 0.0);
  CHECK(cx.tau(std::vector<double>{kPlateauHalfWidth + 0.2, 0.0}) == doctest::Approx(0.1));
  CHECK(cx.tau(std::vector<double>{-3.0, 0.0}) == -0.4);
  auto hm_spec = abstention_spec(RewardRegime::hard_margin);
  hm_spec.margin = 0.25;
  const Oracle hm(hm_spec);
  CHECK(hm.tau(std::vector<double>{0.31, 0.0}) == 0.25);
  CHECK(hm.tau(std::vector<double>{0.3, 0.0}) == -0.25);
}

TEST_CASE("oracle conditional means agree with outcome draws") {
  const Oracle o(abstention_spec(RewardRegime::complex));
  const std::vector<double> x{1.2, -0.4};
  CounterRng rng(9, 0, "probe");
  for (int arm : {0, 1}) {
    double sum = 0.0;
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) sum += o.draw_outcome(arm, x, rng);
    CHECK(sum / draws == doctest::Approx(o.mean_outcome(arm, x)).epsilon(2e-3));
  }
  CHECK(clipped_normal_mean(0.5, 0.0) == 0.5);
  CHECK(clipped_normal_mean(1.5, 0.0) == 1.0);
  CHECK(clipped_normal_mean(0.5, 0.1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("finite support snaps covariates to the grid") {
  auto spec = abstention_spec(RewardRegime::hard_margin);
  spec.support_points = 5;
  for (const auto& s : generate(spec, 500, 0).data.samples())
    for (double v : s.x) {
      const double k = (v + 2.0);
      CHECK(std::abs(k - std::round(k)) < 1e-12);
    }
  spec.support_points = 1;
  CHECK_THROWS_AS(spec.validate(), InputError);
}

TEST_CASE("truth sample values") {
  const Oracle o(abstention_spec(RewardRegime::linear));
  const TruthSample t(o, 20000, 1);
  const auto pol = BinaryPolicy::axis(0, 0.0);
  double by_hand = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    by_hand += t.points()[i][0] > 0.0 ? t.mu1()[i] : t.mu0()[i];
  CHECK(t.value(pol) == doctest::Approx(by_hand / t.size()).epsilon(1e-14));
  const AbstainingPolicy ap(pol, BinaryPolicy::axis(0, 0.5));
  const auto labels = t.labels(ap);
  const double rate = TruthSample::abstention_rate(labels);
  CHECK(t.value(ap, 0.1) == doctest::Approx(t.value(ap, 0.0) + 0.1 * rate).epsilon(1e-12));
  const auto mc = true_value(pol, o, 200000, 5);
  CHECK(std::abs(mc.value - t.value(pol)) <= 4 * mc.standard_error + 0.01);
}

TEST_CASE("nuisance degenerate cases") {
  const auto data = generate(abstention_spec(RewardRegime::linear), 400, 0).data;
  double mean1 = 0.0, mean0 = 0.0;
  std::size_t n1 = 0;
  for (const auto& s : data.samples()) {
    if (s.d == 1) { mean1 += s.y; ++n1; } else { mean0 += s.y; }
  }
  mean1 /= n1;
  mean0 /= (data.size() - n1);
  const std::vector<double> x{0.3, -0.2};

  NuisanceParams one_bin;
  one_bin.bins = 1;
  const auto h = fit_nuisance(data, NuisanceMethod::histogram, one_bin);
  CHECK(h.g(1, x) == doctest::Approx(mean1).epsilon(1e-12));
  CHECK(h.g(0, x) == doctest::Approx(mean0).epsilon(1e-12));
  CHECK(h.p(x) == doctest::Approx(static_cast<double>(n1) / data.size()).epsilon(1e-12));

  NuisanceParams all;
  all.k = data.size();
  const auto k = fit_nuisance(data, NuisanceMethod::knn, all);
  CHECK(k.g(1, x) == doctest::Approx(mean1).epsilon(1e-12));
  CHECK(k.g(0, x) == doctest::Approx(mean0).epsilon(1e-12));
  CHECK(*k.fitted_on() == data.id());

  NuisanceParams zero;
  zero.bins = 0;
  CHECK_THROWS_AS(fit_nuisance(data, NuisanceMethod::histogram, zero), InputError);
  const auto treated_only =
      testing::dataset({testing::sample({0.1}, 1, 0.5, 0.5), testing::sample({0.2}, 1, 0.5, 0.5)});
  CHECK_THROWS_AS(fit_nuisance(treated_only, NuisanceMethod::histogram), FittingError);
  CHECK_THROWS_AS(parse_nuisance_method("forest"), InputError);
}

TEST_CASE("histogram nuisance error shrinks with n") {
  const auto spec = abstention_spec(RewardRegime::linear);
  const Oracle o(spec);
  const auto small = fit_nuisance(generate(spec, 300, 0).data, NuisanceMethod::histogram);
  const auto large = fit_nuisance(generate(spec, 30000, 0).data, NuisanceMethod::histogram);
  const double e_small = estimate_err_dr(small, o, 20000, 1);
  const double e_large = estimate_err_dr(large, o, 20000, 1);
  MESSAGE("Err_DR n=300 " << e_small << ", n=30000 " << e_large);
  CHECK(e_large < e_small);
  CHECK(estimate_err_dr(o.nuisance(), o, 5000, 1) == 0.0);
}
