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

#include "shepherd/policies.hpp"

#include <array>
#include <cmath>

namespace shepherd {
namespace {

struct StrategyRow {
  FixedStrategyKind kind;
  const char* name;
  std::array<double, kNumGameStates> coop;  // s0, CC, CD, DC, DD
};

constexpr StrategyRow kStrategies[] = {
    {FixedStrategyKind::AllC, "AllC", {1, 1, 1, 1, 1}},
    {FixedStrategyKind::AllD, "AllD", {0, 0, 0, 0, 0}},
    {FixedStrategyKind::TitForTat, "TitForTat", {1, 1, 0, 1, 0}},
    {FixedStrategyKind::WinStayLoseShift, "WSLS", {1, 1, 0, 0, 1}},
    {FixedStrategyKind::Grim, "Grim", {1, 1, 0, 0, 0}},
};

const StrategyRow& row_of(FixedStrategyKind kind) {
  for (const auto& row : kStrategies)
    if (row.kind == kind) return row;
  throw ConfigError("unknown fixed strategy");
}

constexpr const char* kRedistributionNames[] = {"AbsoluteProportional",
                                                "RelativeProportional", "Uniform",
                                                "Random"};

Vec4<double> normalized_or_uniform(const Vec4<double>& weights) {
  const double total = weights.sum();
  if (!(total > 0.0)) return Vec4<double>::Constant(1.0 / kPggParticipants);
  return weights / total;
}

void check_rho(const Vec4<double>& rho) {
  for (int i = 0; i < kPggParticipants; ++i)
    if (!(rho[i] >= 0.0 && rho[i] <= 1.0))
      throw DomainError("redistribution: contribution fraction outside [0,1]");
}

}  // namespace

std::string_view FixedStrategy::name() const { return row_of(kind).name; }

Vec5<double> FixedStrategy::coop_probs() const {
  const auto& c = row_of(kind).coop;
  Vec5<double> p;
  for (int s = 0; s < kNumGameStates; ++s) p[s] = c[static_cast<std::size_t>(s)];
  return p;
}

std::optional<FixedStrategy> FixedStrategy::from_name(std::string_view name) {
  if (name == "Selfish") return FixedStrategy{FixedStrategyKind::AllD};
  if (name == "TFT") return FixedStrategy{FixedStrategyKind::TitForTat};
  if (name == "WinStayLoseShift") return FixedStrategy{FixedStrategyKind::WinStayLoseShift};
  for (const auto& row : kStrategies)
    if (name == row.name) return FixedStrategy{row.kind};
  return std::nullopt;
}

std::vector<FixedStrategy> FixedStrategy::all() {
  std::vector<FixedStrategy> out;
  for (const auto& row : kStrategies) out.push_back({row.kind});
  return out;
}

std::vector<FixedStrategy> comparison_strategies() {
  return {{FixedStrategyKind::TitForTat},
          {FixedStrategyKind::AllC},
          {FixedStrategyKind::AllD},
          {FixedStrategyKind::WinStayLoseShift}};
}

MechanismNet init_mechanism_net(std::mt19937_64& rng) {
  MechanismNet net;
  auto fill = [&rng](auto& m, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  fill(net.w1, kMechanismInputs);
  fill(net.b1, kMechanismInputs);
  fill(net.w2, kMechanismHidden);
  fill(net.b2, kMechanismHidden);
  return net;
}

std::string_view redistribution_name(Redistribution kind) {
  return kRedistributionNames[static_cast<int>(kind)];
}

std::optional<Redistribution> redistribution_from_name(std::string_view name) {
  for (auto kind : all_redistributions())
    if (redistribution_name(kind) == name) return kind;
  return std::nullopt;
}

std::vector<Redistribution> all_redistributions() {
  return {Redistribution::AbsoluteProportional, Redistribution::RelativeProportional,
          Redistribution::Uniform, Redistribution::Random};
}

Vec4<double> redistribution_shares(Redistribution kind, const PggSpec& spec,
                                   const Vec4<double>& rho, std::mt19937_64& rng) {
  check_rho(rho);
  switch (kind) {
    case Redistribution::AbsoluteProportional:
      return normalized_or_uniform(rho.cwiseProduct(spec.endowments));
    case Redistribution::RelativeProportional:
      return normalized_or_uniform(rho);
    case Redistribution::Uniform:
      return Vec4<double>::Constant(1.0 / kPggParticipants);
    case Redistribution::Random: {
      // Flat Dirichlet: normalized unit exponentials.
      std::exponential_distribution<double> expo(1.0);
      Vec4<double> w;
      for (int i = 0; i < kPggParticipants; ++i) w[i] = expo(rng);
      return normalized_or_uniform(w);
    }
  }
  throw ConfigError("unknown redistribution kind");
}

Vec4<double> baseline_redistribution(Redistribution kind, const PggSpec& spec,
                                     const Vec4<double>& rho, std::mt19937_64& rng) {
  return redistribution_shares(kind, spec, rho, rng) * pgg_pool(spec, rho);
}

PayoutSensitivity<double> baseline_redistribution_with_slope(Redistribution kind,
                                                             const PggSpec& spec,
                                                             const Vec4<double>& rho,
                                                             std::mt19937_64& rng) {
  const Vec4<double> share = redistribution_shares(kind, spec, rho, rng);
  const double pool = pgg_pool(spec, rho);
  const double g = spec.growth;
  PayoutSensitivity<double> out;
  out.payouts = share * pool;
  for (int i = 0; i < kPggParticipants; ++i) {
    const double e = spec.endowments[i];
    double slope = share[i] * g * e;  // share held fixed
    if (kind == Redistribution::AbsoluteProportional && pool > 0.0) {
      slope = g * e;
    } else if (kind == Redistribution::RelativeProportional && rho.sum() > 0.0) {
      const double total = rho.sum();
      slope = g * e * share[i] + pool * (total - rho[i]) / (total * total);
    }
    out.own_slope[i] = slope;
  }
  return out;
}

}  // namespace shepherd
