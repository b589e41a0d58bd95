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

#include "shepherd/games.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace shepherd {
namespace {

// Labels keyed by the strict ordering of the four payoffs, highest first.
// Only canonical (R > P) orderings appear; names are cosmetic.
struct NamedOrdering {
  const char* ordering;
  const char* name;
};

constexpr NamedOrdering kNamedOrderings[] = {
    {"TRPS", "PrisonersDilemma"}, {"TRSP", "Chicken"},
    {"RTPS", "StagHunt"},         {"RTSP", "Harmony"},
    {"SRPT", "Deadlock"},         {"TSRP", "Leader"},
    {"STRP", "Hero"},             {"RSTP", "Concord"},
    {"RSPT", "Peace"},            {"RPST", "PureCoordination"},
    {"RPTS", "Coordination"},     {"SRTP", "Altruism"},
};

std::string ordering_of(const GameSpec& g) {
  std::array<std::pair<int, char>, 4> entries = {{{g.reward, 'R'},
                                                  {g.sucker, 'S'},
                                                  {g.temptation, 'T'},
                                                  {g.punishment, 'P'}}};
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::string out;
  for (const auto& e : entries) out.push_back(e.second);
  return out;
}

bool is_payoff_permutation(const GameSpec& g) {
  auto p = g.payoffs();
  std::sort(p.begin(), p.end());
  return p == std::array<int, 4>{-3, -2, -1, 0};
}

}  // namespace

int GameSpec::min_payoff() const {
  const auto p = payoffs();
  return *std::min_element(p.begin(), p.end());
}

int GameSpec::max_payoff() const {
  const auto p = payoffs();
  return *std::max_element(p.begin(), p.end());
}

GameSpec relabel(const GameSpec& g) {
  GameSpec out{g.punishment, g.temptation, g.sucker, g.reward, ""};
  return out;
}

bool is_canonical(const GameSpec& g) {
  return is_payoff_permutation(g) && g.reward > g.punishment;
}

std::string game_name(const GameSpec& g) {
  const std::string ordering = ordering_of(is_canonical(g) ? g : relabel(g));
  for (const auto& named : kNamedOrderings)
    if (ordering == named.ordering) return named.name;
  return "Game_" + ordering;
}

std::vector<GameSpec> enumerate_games() {
  std::array<int, 4> p = {-3, -2, -1, 0};
  std::vector<GameSpec> games;
  do {
    GameSpec g{p[0], p[1], p[2], p[3], ""};
    if (g.reward > g.punishment) {
      g.name = game_name(g);
      games.push_back(g);
    }
  } while (std::next_permutation(p.begin(), p.end()));
  std::sort(games.begin(), games.end(), [](const GameSpec& a, const GameSpec& b) {
    return a.payoffs() > b.payoffs();
  });
  return games;
}

std::optional<GameSpec> find_game(std::string_view name) {
  for (const auto& g : enumerate_games())
    if (g.name == name) return g;
  return std::nullopt;
}

void MatrixGameMDP::validate() const {
  if (!is_payoff_permutation(game))
    throw ConfigError("game payoffs must be a permutation of {0,-1,-2,-3}");
  if (!(discount >= 0.0 && discount < 1.0))
    throw ConfigError("discount must lie in [0, 1)");
}

std::string_view propensity_name(Propensity p) {
  return p == Propensity::Direct ? "direct" : "logit";
}

std::optional<Propensity> propensity_from_name(std::string_view name) {
  if (name == "direct") return Propensity::Direct;
  if (name == "logit") return Propensity::Logit;
  return std::nullopt;
}

void PggSpec::validate() const {
  if (n_participants != kPggParticipants)
    throw ConfigError("public-goods game requires exactly 4 participants");
  if (growth != kPggGrowth) throw ConfigError("public-goods growth factor must be 1.6");
  for (int i = 0; i < kPggParticipants; ++i) {
    const double e = endowments[i];
    if (!(e >= kPggMinEndowment && e <= kPggMaxEndowment))
      throw ConfigError("endowment " + std::to_string(e) + " outside [0.2, 1.0]");
  }
}

PggOutcome<double> pgg_round(const PggSpec& spec, const Vec4<double>& rho,
                             const Vec4<double>& payouts) {
  for (int i = 0; i < kPggParticipants; ++i) {
    if (!(rho[i] >= 0.0 && rho[i] <= 1.0))
      throw DomainError("pgg_round: contribution fraction outside [0,1]");
    if (!(payouts[i] >= 0.0)) throw ContractError("pgg_round: negative payout");
  }
  const double pool = pgg_pool(spec, rho);
  if (std::abs(payouts.sum() - pool) > kPoolTolerance)
    throw ContractError("pgg_round: payouts sum to " + std::to_string(payouts.sum()) +
                        " but the grown pool is " + std::to_string(pool));
  return pgg_outcome(spec, rho, payouts);
}

}  // namespace shepherd
