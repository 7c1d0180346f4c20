#include <doctest.h>

#include <random>

#include "abstain/core.hpp"
#include "support.hpp"

using namespace abstain;
using testing::dataset;
using testing::sample;

TEST_CASE("evaluate_policy on the basic rule kinds") {
  const std::vector<double> x{0.3, 0.7};
  CHECK(evaluate_policy(BinaryPolicy::constant(1), x) == Action::treat);

  const auto axis = BinaryPolicy::axis(0, 0.5);
  CHECK(evaluate_policy(axis, std::vector<double>{0.6, 0.0}) == Action::treat);
  CHECK(evaluate_policy(axis, std::vector<double>{0.4, 0.0}) == Action::control);
  CHECK(BinaryPolicy::axis(0, 0.5, false).decide(std::vector<double>{0.4, 0.0}) == 1);

  const auto lin = BinaryPolicy::linear({1.0, 1.0}, -1.0);
  CHECK(lin.decide(std::vector<double>{0.6, 0.6}) == 1);
  CHECK(lin.decide(std::vector<double>{0.5, 0.5}) == 0);  // strict inequality
}

TEST_CASE("dimension mismatch is an input error") {
  CHECK_THROWS_AS(BinaryPolicy::axis(3, 0.5).decide(std::vector<double>{0.1, 0.2}), InputError);
  CHECK_THROWS_AS(BinaryPolicy::linear({1.0, 1.0}, 0.0).decide(std::vector<double>{0.1}),
                  InputError);
  CHECK_THROWS_AS(BinaryPolicy::constant(2), InputError);
}

TEST_CASE("table policy with fallback") {
  TablePolicy t;
  t.labels[{0.0}] = 1;
  t.labels[{1.0}] = 0;
  t.fallback = std::make_shared<const BinaryPolicy>(BinaryPolicy::constant(1));
  const BinaryPolicy p(t);
  CHECK(p.decide(std::vector<double>{0.0}) == 1);
  CHECK(p.decide(std::vector<double>{1.0}) == 0);
  CHECK(p.decide(std::vector<double>{0.5}) == 1);

  TablePolicy bare;
  bare.labels[{0.0}] = 1;
  bare.default_label = 0;
  CHECK(BinaryPolicy(bare).decide(std::vector<double>{2.0}) == 0);
}

TEST_CASE("abstaining policy with base == member never abstains") {
  const auto base = BinaryPolicy::axis(0, 0.5);
  const AbstainingPolicy ap(base, base);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> x{u(gen)};
    CHECK(ap(x) != Action::abstain);
  }
}

TEST_CASE("abstention region is exactly the disagreement set") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto base = BinaryPolicy::axis(0, u(gen), u(gen) < 0.5);
    const auto member = BinaryPolicy::linear({u(gen) - 0.5, u(gen) - 0.5}, u(gen) - 0.5);
    const AbstainingPolicy ap(base, member);
    for (int i = 0; i < 50; ++i) {
      const std::vector<double> x{u(gen), u(gen)};
      const Action a = ap(x);
      const bool disagree = base.decide(x) != member.decide(x);
      CHECK((a == Action::abstain) == disagree);
      if (a != Action::abstain) CHECK(to_int(a) == base.decide(x));
      CHECK(ap(x) == a);  // pure
    }
  }
}

TEST_CASE("disagreement_mass examples") {
  const auto d = dataset({sample({0.1}, 0, 0.0, 0.5), sample({0.4}, 1, 1.0, 0.5),
                          sample({0.6}, 0, 1.0, 0.5), sample({0.9}, 1, 0.0, 0.5)});
  const auto p = BinaryPolicy::axis(0, 0.5);
  CHECK(disagreement_mass(p, p, d) == 0.0);
  CHECK(disagreement_mass(BinaryPolicy::constant(0), BinaryPolicy::constant(1), d) == 1.0);
  // thresholds 0.5 and 0.3 disagree only at x = 0.4
  CHECK(disagreement_mass(p, BinaryPolicy::axis(0, 0.3), d) == doctest::Approx(0.25));
  CHECK_THROWS_AS(disagreement_mass(p, p, dataset({})), InputError);
}

TEST_CASE("disagreement_mass is a pseudometric on a fixed dataset") {
  std::mt19937_64 gen(3);
  const auto d = testing::random_dataset(gen, 60, 2, 0.1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = BinaryPolicy::axis(0, u(gen));
    const auto b = BinaryPolicy::axis(1, u(gen), u(gen) < 0.5);
    const auto c = BinaryPolicy::linear({u(gen) - 0.5, u(gen) - 0.5}, u(gen) - 0.5);
    CHECK(disagreement_mass(a, b, d) == disagreement_mass(b, a, d));
    CHECK(disagreement_mass(a, c, d) <=
          disagreement_mass(a, b, d) + disagreement_mass(b, c, d) + 1e-15);
    CHECK(disagreement_mass(a, a, d) == 0.0);
  }
}

TEST_CASE("dataset validation") {
  CHECK_THROWS_AS(Dataset({}, 0.0, 1), InputError);
  CHECK_THROWS_AS(Dataset({}, 0.6, 1), InputError);
  CHECK_NOTHROW(Dataset({}, 0.5, 1));
  CHECK_THROWS_AS(dataset({sample({0.1}, 2, 0.0, 0.5)}), InputError);
  CHECK_THROWS_AS(dataset({sample({0.1}, 1, 0.0, 0.05)}), InputError);
  CHECK_THROWS_AS(Dataset({sample({0.1, 0.2}, 1, 0.0, 0.5)}, 0.1, 1), InputError);

  const auto d = dataset({sample({0.1}, 0, 0.0, 0.5), sample({0.2}, 1, 1.0, 0.5)});
  CHECK(d.has_propensities());
  const std::vector<std::size_t> idx{1};
  const auto sub = d.subset(idx);
  CHECK(sub.size() == 1);
  CHECK(sub[0].x[0] == 0.2);
  CHECK(sub.id() != d.id());
  CHECK(d.concat(sub).size() == 3);
}

TEST_CASE("policy classes") {
  const std::vector<std::size_t> features{0};
  const std::vector<double> thresholds{0.25, 0.5, 0.75};
  const auto cls = axis_threshold_class(features, thresholds);
  CHECK(cls.size() == 6);
  CHECK(cls.vc_dim() == 2);
  CHECK_THROWS_AS(PolicyClass({}, 1), InputError);
  CHECK_THROWS_AS(PolicyClass({BinaryPolicy::constant(0)}, 0), InputError);

  // on two points at 0.1 and 0.9 only a few labelings are distinct
  const auto d = dataset({sample({0.1}, 0, 0.0, 0.5), sample({0.9}, 1, 1.0, 0.5)});
  const auto distinct = cls.distinct_on(d);
  CHECK(distinct == std::vector<std::size_t>{0, 1});

  const std::vector<double> w{-1.0, 0.0, 1.0};
  const std::vector<double> b{0.0};
  CHECK(linear_threshold_class(2, 0, 1, w, b).size() == 8);  // 9 pairs minus (0,0)
  CHECK(linspace(0.0, 1.0, 5) == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("nuisance model clips the propensity") {
  const NuisanceModel m([](int a, Covariates) { return a == 1 ? 0.7 : 0.2; },
                        [](Covariates x) { return x[0]; }, 0.1);
  CHECK(m.p(std::vector<double>{0.01}) == 0.1);
  CHECK(m.p(std::vector<double>{0.99}) == doctest::Approx(0.9));
  CHECK(m.p(std::vector<double>{0.4}) == 0.4);
  CHECK(m.g(1, std::vector<double>{0.0}) == 0.7);
  CHECK(!m.err_dr_bound());
  CHECK(*m.with_err_dr(0.02).err_dr_bound() == 0.02);
}
