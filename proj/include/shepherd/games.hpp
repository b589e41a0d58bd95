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

// Environments: iterated 2x2 symmetric matrix games with one-step memory
// (solved exactly as a 5-state Markov chain) and the one-shot public-goods
// resource-allocation game.
//
// Every routine that takes probabilities or parameters is templated on the
// scalar type so the same code runs on doubles and on shepherd::Dual.

#ifndef SHEPHERD_GAMES_HPP_
#define SHEPHERD_GAMES_HPP_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "shepherd/diffkit.hpp"
#include "shepherd/errors.hpp"

namespace shepherd {

// ---------------------------------------------------------------------------
// Iterated matrix games.

// Markov states; the first letter of a joint action is the mechanism's move.
enum GameState : int { kStart = 0, kCC = 1, kCD = 2, kDC = 3, kDD = 4 };
inline constexpr int kNumGameStates = 5;

template <class Scalar>
using Vec5 = Eigen::Matrix<Scalar, kNumGameStates, 1>;
template <class Scalar>
using Mat5 = Eigen::Matrix<Scalar, kNumGameStates, kNumGameStates>;

// Payoffs of a symmetric 2x2 game. Values are a permutation of {0,-1,-2,-3}.
struct GameSpec {
  int reward = 0;      // R: both cooperate
  int sucker = 0;      // S: cooperate against a defector
  int temptation = 0;  // T: defect against a cooperator
  int punishment = 0;  // P: both defect
  std::string name;

  std::array<int, 4> payoffs() const { return {reward, sucker, temptation, punishment}; }
  int min_payoff() const;
  int max_payoff() const;

  friend bool operator==(const GameSpec& a, const GameSpec& b) {
    return a.payoffs() == b.payoffs();
  }
};

// Image of a game under relabeling C<->D for both players: (R,S,T,P) -> (P,T,S,R).
GameSpec relabel(const GameSpec& game);

// Payoffs form a permutation of {0,-1,-2,-3} and R > P.
bool is_canonical(const GameSpec& game);

// Conventional label for a canonical payoff ordering ("PrisonersDilemma", ...).
std::string game_name(const GameSpec& game);

// The 12 canonical games, sorted by (R,S,T,P) descending.
std::vector<GameSpec> enumerate_games();

std::optional<GameSpec> find_game(std::string_view name);

inline constexpr double kDefaultDiscount = 0.96;

struct MatrixGameMDP {
  GameSpec game;
  double discount = kDefaultDiscount;

  // Rewards on arrival in (s0, CC, CD, DC, DD).
  Vec5<double> mechanism_rewards() const {
    Vec5<double> r;
    r << 0.0, game.reward, game.sucker, game.temptation, game.punishment;
    return r;
  }
  Vec5<double> participant_rewards() const {
    Vec5<double> r;
    r << 0.0, game.reward, game.temptation, game.sucker, game.punishment;
    return r;
  }
  void validate() const;
};

namespace detail {
template <class Scalar>
void check_probabilities(const Vec5<Scalar>& p, const char* who) {
  for (int s = 0; s < kNumGameStates; ++s) {
    const double v = value_of(p[s]);
    if (!(v >= 0.0 && v <= 1.0))
      throw DomainError(std::string("transition_kernel: ") + who +
                        " cooperation probability out of [0,1]: " + std::to_string(v));
  }
}
}  // namespace detail

// Row s holds next-state probabilities when the mechanism cooperates with
// probability mech_coop[s] and the participant with part_coop[s]. Both are
// indexed by the global state; nothing ever transitions back into s0.
template <class Scalar>
Mat5<Scalar> transition_kernel(const Vec5<Scalar>& mech_coop,
                               const Vec5<Scalar>& part_coop) {
  detail::check_probabilities(mech_coop, "mechanism");
  detail::check_probabilities(part_coop, "participant");
  Mat5<Scalar> t;
  for (int s = 0; s < kNumGameStates; ++s) {
    const Scalar& a = mech_coop[s];
    const Scalar& b = part_coop[s];
    const Scalar not_a = 1.0 - a;
    const Scalar not_b = 1.0 - b;
    t(s, kStart) = Scalar(0.0);
    t(s, kCC) = a * b;
    t(s, kCD) = a * not_b;
    t(s, kDC) = not_a * b;
    t(s, kDD) = not_a * not_b;
  }
  return t;
}

// Exact solution of the discounted chain. `values_*` are unnormalized state
// values V = (I - gT)^-1 T r; `inverse` is (I - gT)^-1, whose row s0 holds
// the discounted visitation counts used by gradient expressions.
template <class Scalar>
struct MatrixGameSolution {
  Mat5<Scalar> kernel;
  Mat5<Scalar> inverse;
  Vec5<Scalar> values_mechanism;
  Vec5<Scalar> values_participant;
  // (1 - g) V(s0): per-step payoff scale, always within [min, max] payoff.
  Scalar mechanism_return;
  Scalar participant_return;
};

template <class Scalar>
MatrixGameSolution<Scalar> solve_matrix_game(const MatrixGameMDP& mdp,
                                             const Vec5<Scalar>& mech_coop,
                                             const Vec5<Scalar>& part_coop) {
  MatrixGameSolution<Scalar> sol;
  sol.kernel = transition_kernel(mech_coop, part_coop);
  const double g = mdp.discount;
  Mat5<Scalar> system = Mat5<Scalar>::Identity();
  system -= sol.kernel * Scalar(g);
  sol.inverse = solve_checked(system, Mat5<Scalar>(Mat5<Scalar>::Identity()));
  const Vec5<Scalar> rm = mdp.mechanism_rewards().template cast<Scalar>();
  const Vec5<Scalar> rp = mdp.participant_rewards().template cast<Scalar>();
  sol.values_mechanism = sol.inverse * (sol.kernel * rm);
  sol.values_participant = sol.inverse * (sol.kernel * rp);
  sol.mechanism_return = sol.values_mechanism[kStart] * (1.0 - g);
  sol.participant_return = sol.values_participant[kStart] * (1.0 - g);
  return sol;
}

template <class Scalar>
struct GameReturns {
  Scalar mechanism;
  Scalar participant;
};

// Normalized returns for one-memory policies given as cooperation logits.
template <class Scalar>
GameReturns<Scalar> matrix_game_returns(const MatrixGameMDP& mdp,
                                        const Vec5<Scalar>& mech_logits,
                                        const Vec5<Scalar>& part_logits) {
  Vec5<Scalar> a, b;
  for (int s = 0; s < kNumGameStates; ++s) {
    a[s] = sigmoid(mech_logits[s]);
    b[s] = sigmoid(part_logits[s]);
  }
  const auto sol = solve_matrix_game(mdp, a, b);
  return {sol.mechanism_return, sol.participant_return};
}

// Same, for policies given directly as cooperation probabilities.
template <class Scalar>
GameReturns<Scalar> matrix_game_returns_from_probs(const MatrixGameMDP& mdp,
                                                   const Vec5<Scalar>& mech_coop,
                                                   const Vec5<Scalar>& part_coop) {
  const auto sol = solve_matrix_game(mdp, mech_coop, part_coop);
  return {sol.mechanism_return, sol.participant_return};
}

// ---------------------------------------------------------------------------
// Public-goods resource-allocation game.

inline constexpr int kPggParticipants = 4;
inline constexpr double kPggGrowth = 1.6;
inline constexpr double kPggMinEndowment = 0.2;
inline constexpr double kPggMaxEndowment = 1.0;
inline constexpr double kPoolTolerance = 1e-9;

template <class Scalar>
using Vec4 = Eigen::Matrix<Scalar, kPggParticipants, 1>;

// How a participant parameter maps to its propensity rho: directly, with
// projected ascent keeping it in [0, 1], or through a sigmoid.
enum class Propensity { Direct, Logit };

std::string_view propensity_name(Propensity p);  // "direct", "logit"
std::optional<Propensity> propensity_from_name(std::string_view name);

struct PggSpec {
  int n_participants = kPggParticipants;
  Vec4<double> endowments = Vec4<double>(1.0, 0.5, 0.4, 0.3);
  double growth = kPggGrowth;
  Propensity propensity = Propensity::Direct;

  void validate() const;
  // Endowment condition used for evaluation and human play.
  static PggSpec human_condition() { return PggSpec{}; }
};

template <class Scalar>
struct PggOutcome {
  Vec4<Scalar> contributions;        // rho_i * e_i
  Vec4<Scalar> payouts;              // p_i
  Vec4<Scalar> participant_returns;  // p_i + (1 - rho_i) e_i
  Scalar mechanism_return;           // mean participant return (welfare)
};

// Bookkeeping shared by the validated round and the differentiable paths.
template <class Scalar>
PggOutcome<Scalar> pgg_outcome(const PggSpec& spec, const Vec4<Scalar>& rho,
                               const Vec4<Scalar>& payouts) {
  PggOutcome<Scalar> out;
  out.payouts = payouts;
  Scalar total(0.0);
  for (int i = 0; i < kPggParticipants; ++i) {
    const double e = spec.endowments[i];
    out.contributions[i] = rho[i] * e;
    out.participant_returns[i] = payouts[i] + (1.0 - rho[i]) * e;
    total += out.participant_returns[i];
  }
  out.mechanism_return = total / static_cast<double>(kPggParticipants);
  return out;
}

// Grown pool growth * sum(rho_i e_i).
template <class Scalar>
Scalar pgg_pool(const PggSpec& spec, const Vec4<Scalar>& rho) {
  Scalar pool(0.0);
  for (int i = 0; i < kPggParticipants; ++i) pool += rho[i] * spec.endowments[i];
  return pool * spec.growth;
}

// One validated round: rho in [0,1], payouts nonnegative and conserving.
PggOutcome<double> pgg_round(const PggSpec& spec, const Vec4<double>& rho,
                             const Vec4<double>& payouts);

}  // namespace shepherd

#endif  // SHEPHERD_GAMES_HPP_
