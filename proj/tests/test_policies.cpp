// Copyright 2026 The Shepherd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <random>

#include "shepherd/policies.hpp"

using namespace shepherd;

namespace {

Vec4<double> random_rho(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  return {u(rng), u(rng), u(rng), u(rng)};
}

}  // namespace

TEST_CASE("one-memory policy maps logits through the sigmoid") {
  OneMemoryPolicy p;
  p.params << 0.5, 0.0, 40.0, -40.0, 0.5;
  const Vec5<double> c = p.coop_probs();
  CHECK(c[0] == doctest::Approx(0.6224593312).epsilon(1e-9));
  CHECK(c[1] == 0.5);
  CHECK(std::abs(c[2] - 1.0) < 1e-9);
  CHECK(std::abs(c[3]) < 1e-9);
}

TEST_CASE("fixed strategies") {
  CHECK(FixedStrategy{FixedStrategyKind::TitForTat}.coop_probs() == Vec5<double>(1, 1, 0, 1, 0));
  CHECK(FixedStrategy{FixedStrategyKind::WinStayLoseShift}.coop_probs() ==
        Vec5<double>(1, 1, 0, 0, 1));
  CHECK(FixedStrategy::from_name("TFT")->kind == FixedStrategyKind::TitForTat);
  CHECK(FixedStrategy::from_name("AllD")->kind == FixedStrategyKind::AllD);
  CHECK_FALSE(FixedStrategy::from_name("Pavlov?"));
  const auto cmp = comparison_strategies();
  REQUIRE(cmp.size() == 4);
  CHECK(cmp[0].name() == "TitForTat");
}

TEST_CASE("tit-for-tat against AllD falls into mutual defection after one step") {
  const Vec5<double> tft = FixedStrategy{FixedStrategyKind::TitForTat}.coop_probs();
  const Vec5<double> alld = FixedStrategy{FixedStrategyKind::AllD}.coop_probs();
  const Mat5<double> t = transition_kernel<double>(tft, alld);
  CHECK(t(kStart, kCD) == 1.0);
  Mat5<double> two = t * t;
  for (int s = 0; s < 5; ++s) CHECK(two(s, kDD) == 1.0);
}

TEST_CASE("mechanism net with zero weights splits the pool equally") {
  const PggSpec spec = PggSpec::human_condition();
  const MechanismNet net = MechanismNet::zeros();
  const Vec4<double> p = mechanism_payouts(net, spec, Vec4<double>(Vec4<double>::Ones()));
  for (int i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(0.88));
  CHECK(mechanism_payouts(net, spec, Vec4<double>(Vec4<double>::Zero())).isZero());
}

TEST_CASE("mechanism net payouts are nonnegative and conserve the pool") {
  const PggSpec spec = PggSpec::human_condition();
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const MechanismNet net = init_mechanism_net(rng);
    const Vec4<double> rho = random_rho(rng);
    const Vec4<double> p = mechanism_payouts(net, spec, rho);
    CHECK((p.array() >= 0).all());
    CHECK(std::abs(p.sum() - pgg_pool(spec, rho)) < 1e-12);
  }
}

TEST_CASE("closed-form own slope matches central differences") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    PggSpec spec;
    std::uniform_real_distribution<double> e(0.2, 1.0);
    for (int i = 0; i < 4; ++i) spec.endowments[i] = e(rng);
    MechanismNet net = init_mechanism_net(rng);
    net.w1 *= 3.0;  // make the slope term non-trivial
    const Vec4<double> rho = random_rho(rng);
    const auto ps = mechanism_payouts_with_slope(net, spec, rho);
    for (int i = 0; i < 4; ++i) {
      const double h = 1e-5;
      Vec4<double> up = rho, down = rho;
      up[i] += h;
      down[i] -= h;
      const double fd =
          (mechanism_payouts(net, spec, up)[i] - mechanism_payouts(net, spec, down)[i]) / (2 * h);
      CHECK(std::abs(ps.own_slope[i] - fd) < 1e-7);
    }
  }
}

TEST_CASE("baseline slopes match central differences") {
  const PggSpec spec = PggSpec::human_condition();
  std::mt19937_64 rng(8);
  for (auto kind : {Redistribution::AbsoluteProportional, Redistribution::RelativeProportional,
                    Redistribution::Uniform}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Vec4<double> rho = random_rho(rng);
      const auto ps = baseline_redistribution_with_slope(kind, spec, rho, rng);
      for (int i = 0; i < 4; ++i) {
        const double h = 1e-6;
        Vec4<double> up = rho, down = rho;
        up[i] += h;
        down[i] -= h;
        const double fd = (baseline_redistribution(kind, spec, up, rng)[i] -
                           baseline_redistribution(kind, spec, down, rng)[i]) /
                          (2 * h);
        CHECK(std::abs(ps.own_slope[i] - fd) < 1e-6);
      }
    }
  }
}

TEST_CASE("baseline examples") {
  const PggSpec spec = PggSpec::human_condition();
  std::mt19937_64 rng(1);
  const Vec4<double> uni =
      baseline_redistribution(Redistribution::Uniform, spec, Vec4<double>::Ones(), rng);
  for (int i = 0; i < 4; ++i) CHECK(uni[i] == doctest::Approx(0.88));

  // Everyone gives everything: absolute shares follow endowments, relative are equal.
  const Vec4<double> abs =
      baseline_redistribution(Redistribution::AbsoluteProportional, spec, Vec4<double>::Ones(), rng);
  CHECK(abs[0] == doctest::Approx(1.6));
  CHECK(abs[3] == doctest::Approx(0.48));
  const Vec4<double> rel =
      baseline_redistribution(Redistribution::RelativeProportional, spec, Vec4<double>::Ones(), rng);
  CHECK(rel[3] == doctest::Approx(0.88));

  const Vec4<double> sole = baseline_redistribution(Redistribution::AbsoluteProportional, spec,
                                                     Vec4<double>(1, 0, 0, 0), rng);
  CHECK(sole[0] == doctest::Approx(1.6));
  CHECK(sole.tail<3>().isZero());
  const Vec4<double> half = baseline_redistribution(Redistribution::RelativeProportional, spec,
                                                     Vec4<double>::Constant(0.5), rng);
  for (int i = 0; i < 4; ++i) CHECK(half[i] == doctest::Approx(0.44));

  const Vec4<double> rnd =
      baseline_redistribution(Redistribution::Random, spec, Vec4<double>::Ones(), rng);
  CHECK((rnd.array() >= 0).all());
  CHECK(rnd.sum() == doctest::Approx(3.52));
  CHECK_THROWS_AS(baseline_redistribution(Redistribution::Uniform, spec, Vec4<double>(1.1, 0, 0, 0), rng),
                  DomainError);
}

TEST_CASE("absolute and relative proportional agree under equal endowments") {
  PggSpec spec;
  spec.endowments = Vec4<double>::Constant(0.6);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec4<double> rho = random_rho(rng);
    const Vec4<double> a = baseline_redistribution(Redistribution::AbsoluteProportional, spec, rho, rng);
    const Vec4<double> r = baseline_redistribution(Redistribution::RelativeProportional, spec, rho, rng);
    CHECK((a - r).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("redistribution names round-trip") {
  for (auto kind : all_redistributions())
    CHECK(redistribution_from_name(redistribution_name(kind)) == kind);
  CHECK_FALSE(redistribution_from_name("Proportional"));
}

TEST_CASE("flatten and from_flat are inverse") {
  std::mt19937_64 rng(10);
  const MechanismNet net = init_mechanism_net(rng);
  const Eigen::VectorXd flat = net.flatten();
  REQUIRE(flat.size() == 420);
  const MechanismNet back = MechanismNet::from_flat(flat);
  CHECK(back.w1 == net.w1);
  CHECK(back.b1 == net.b1);
  CHECK(back.w2 == net.w2);
  CHECK(back.b2 == net.b2);
  CHECK(back.flatten() == flat);
  CHECK_THROWS_AS(MechanismNet::from_flat(Eigen::VectorXd::Zero(419)), ConfigError);
}
