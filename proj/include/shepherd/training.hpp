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

// Inner-outer loop training of mechanisms.
//
// Inner loop: participants run independent gradient ascent on their own
// return against a frozen mechanism for T_p steps; the mechanism's return is
// summed over the trajectory. Outer loop: the mechanism ascends that sum.
//
// Three outer updates are provided:
//   Diff-MD  exact gradient through the unrolled inner loop (forward mode),
//   ES-MD    Gaussian-perturbation estimator sum(eps_p * Rbar_p) / (N sigma),
//   LOLA     gradient through one projected participant step.
//
// Participant gradients are closed-form expressions of the game solution, so
// differentiating the whole inner loop needs only one level of duals.

#ifndef SHEPHERD_TRAINING_HPP_
#define SHEPHERD_TRAINING_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "shepherd/diffkit.hpp"
#include "shepherd/games.hpp"
#include "shepherd/policies.hpp"
#include "shepherd/rng.hpp"

namespace shepherd {

enum class Method { DiffMD, EsMD, Lola };

std::string_view method_name(Method method);  // "diff-md", "es-md", "lola"
std::optional<Method> method_from_name(std::string_view name);

struct TrainConfig {
  int outer_steps = 10000;       // T_m
  int inner_steps = 50;          // T_p
  double lr_mechanism = 0.1;     // gamma_m
  double lr_participant = 10.0;  // gamma_p
  int es_batch = 256;            // N_p
  double es_sigma = 1.0;         // sigma_m
  double participant_init_std = 1.0;
  bool es_antithetic = false;
  bool es_rank_shaping = false;
  double grad_clip = 10.0;  // max L2 norm of the outer gradient; 0 disables
  std::uint64_t seed = 0;

  static TrainConfig matrix_game_defaults();
  static TrainConfig pgg_defaults();
  void validate() const;
};

// ---------------------------------------------------------------------------
// Environments.

struct MatrixGameEnv {
  MatrixGameMDP mdp;
};

struct PggEnv {
  PggSpec eval_spec = PggSpec::human_condition();
  double endowment_min = kPggMinEndowment;
  double endowment_max = kPggMaxEndowment;
  bool resample_endowments = true;  // draw fresh endowments per inner loop
};

using Environment = std::variant<MatrixGameEnv, PggEnv>;

// A concrete game the inner loop runs on.
using GameInstance = std::variant<MatrixGameMDP, PggSpec>;

int mechanism_param_count(const Environment& env);
int participant_param_count(const Environment& env);
std::string environment_label(const Environment& env);  // game name or "pgg"
TrainConfig default_config(const Environment& env);

// Training instance (endowments resampled when configured).
GameInstance sample_instance(const Environment& env, Rng& rng);
// Evaluation instance (fixed endowments).
GameInstance evaluation_instance(const Environment& env);
// theta_p^0 ~ Normal(0, std^2) per coordinate; direct PGG propensities are
// the sigmoid of that draw.
Eigen::VectorXd sample_participant(const Environment& env, double init_std, Rng& rng);
// Logits 0 for matrix games, default MLP initialization for the PGG.
Eigen::VectorXd initial_mechanism(const Environment& env, Rng& rng);

// ---------------------------------------------------------------------------
// One inner-loop step: returns at the current participant parameters and the
// participants' own-return gradient.

template <class Scalar>
struct StepResult {
  Scalar mechanism_return;
  VecX<Scalar> participant_returns;
  VecX<Scalar> participant_grad;
  bool unit_box = false;  // participant parameters are projected onto [0, 1]
};

// Matrix game against a mechanism given by cooperation probabilities.
template <class Scalar>
StepResult<Scalar> matrix_game_step(const MatrixGameMDP& mdp,
                                    const Vec5<Scalar>& mech_coop,
                                    const VecX<Scalar>& part_logits) {
  Vec5<Scalar> b;
  for (int s = 0; s < kNumGameStates; ++s) b[s] = sigmoid(part_logits[s]);
  const auto sol = solve_matrix_game(mdp, mech_coop, b);

  // dV(s0)/db_k = inv(s0,k) * dT_k/db_k . (r_p + g V_p), with
  // dT_k/db_k = (0, a, -a, 1-a, -(1-a)).
  const double g = mdp.discount;
  const Vec5<double> rp = mdp.participant_rewards();
  StepResult<Scalar> out;
  out.mechanism_return = sol.mechanism_return;
  out.participant_returns.resize(1);
  out.participant_returns[0] = sol.participant_return;
  out.participant_grad.resize(kNumGameStates);
  Vec5<Scalar> w;
  for (int s = 0; s < kNumGameStates; ++s) w[s] = sol.values_participant[s] * g + rp[s];
  for (int k = 0; k < kNumGameStates; ++k) {
    const Scalar& a = mech_coop[k];
    const Scalar branch = a * (w[kCC] - w[kCD]) + (1.0 - a) * (w[kDC] - w[kDD]);
    out.participant_grad[k] = sol.inverse(kStart, k) * branch * (b[k] * (1.0 - b[k])) * (1.0 - g);
  }
  return out;
}

// Public-goods round; `rule(rho)` returns PayoutSensitivity<Scalar>.
template <class Scalar, class PayoutRule>
StepResult<Scalar> pgg_step(const PggSpec& spec, PayoutRule&& rule,
                            const VecX<Scalar>& part_params) {
  const bool direct = spec.propensity == Propensity::Direct;
  Vec4<Scalar> rho;
  for (int i = 0; i < kPggParticipants; ++i)
    rho[i] = direct ? clamp(part_params[i], 0.0, 1.0) : sigmoid(part_params[i]);
  const PayoutSensitivity<Scalar> ps = rule(rho);
  const PggOutcome<Scalar> outcome = pgg_outcome(spec, rho, ps.payouts);
  StepResult<Scalar> out;
  out.mechanism_return = outcome.mechanism_return;
  out.participant_returns = outcome.participant_returns;
  out.participant_grad.resize(kPggParticipants);
  out.unit_box = direct;
  for (int i = 0; i < kPggParticipants; ++i) {
    const Scalar slope = ps.own_slope[i] - spec.endowments[i];
    out.participant_grad[i] = direct ? slope : slope * (rho[i] * (1.0 - rho[i]));
  }
  return out;
}

// Step function of a trainable mechanism with parameters theta_m.
template <class Scalar>
auto mechanism_step_fn(const MatrixGameMDP& mdp, const VecX<Scalar>& theta_m) {
  if (theta_m.size() != kNumGameStates)
    throw ConfigError("matrix-game mechanism needs 5 parameters");
  const Vec5<Scalar> coop = coop_probs<Scalar>(Vec5<Scalar>(theta_m));
  return [mdp, coop](const VecX<Scalar>& theta_p) {
    return matrix_game_step<Scalar>(mdp, coop, theta_p);
  };
}

template <class Scalar>
auto mechanism_step_fn(const PggSpec& spec, const VecX<Scalar>& theta_m) {
  const auto net = MechanismNetT<Scalar>::from_flat(theta_m);
  return [spec, net](const VecX<Scalar>& theta_p) {
    return pgg_step<Scalar>(
        spec, [&](const Vec4<Scalar>& rho) { return mechanism_payouts_with_slope(net, spec, rho); },
        theta_p);
  };
}

// ---------------------------------------------------------------------------
// Inner loop.

template <class Scalar>
struct InnerLoopTrace {
  std::vector<VecX<Scalar>> participant_params;   // theta_p^0 .. theta_p^{T_p}
  std::vector<Scalar> mechanism_returns;          // R_m before each update
  std::vector<VecX<Scalar>> participant_returns;  // R_p before each update
  Scalar accumulated_return = Scalar(0.0);        // Rbar_m
};

// Returns are recorded before each participant update; Rbar_m is their sum.
template <class Scalar, class StepFn>
InnerLoopTrace<Scalar> unroll_inner_loop(StepFn&& step, VecX<Scalar> theta_p, int steps,
                                         double lr_participant) {
  InnerLoopTrace<Scalar> trace;
  trace.participant_params.reserve(static_cast<std::size_t>(steps) + 1);
  trace.participant_params.push_back(theta_p);
  for (int t = 0; t < steps; ++t) {
    StepResult<Scalar> r = step(theta_p);
    trace.accumulated_return += r.mechanism_return;
    trace.mechanism_returns.push_back(r.mechanism_return);
    trace.participant_returns.push_back(std::move(r.participant_returns));
    for (Eigen::Index i = 0; i < theta_p.size(); ++i) {
      theta_p[i] += r.participant_grad[i] * lr_participant;
      if (r.unit_box) theta_p[i] = clamp(theta_p[i], 0.0, 1.0);
    }
    trace.participant_params.push_back(theta_p);
  }
  return trace;
}

// run_inner_loop for a trainable mechanism on a concrete instance.
template <class Scalar>
InnerLoopTrace<Scalar> run_inner_loop(const GameInstance& instance, const VecX<Scalar>& theta_m,
                                      const VecX<Scalar>& theta_p0, int steps,
                                      double lr_participant) {
  return std::visit(
      [&](const auto& game) {
        return unroll_inner_loop<Scalar>(mechanism_step_fn<Scalar>(game, theta_m), theta_p0,
                                         steps, lr_participant);
      },
      instance);
}

// Gradient of the participants' own returns at (theta_m, theta_p).
template <class Scalar>
VecX<Scalar> participant_grad(const GameInstance& instance, const VecX<Scalar>& theta_m,
                              const VecX<Scalar>& theta_p) {
  return std::visit(
      [&](const auto& game) { return mechanism_step_fn<Scalar>(game, theta_m)(theta_p).participant_grad; },
      instance);
}

// ---------------------------------------------------------------------------
// Mechanism gradients and updates.

struct GradientResult {
  Eigen::VectorXd gradient;
  double accumulated_return = 0.0;  // Rbar_m (or the mean over an ES batch)
};

// Exact d Rbar_m / d theta_m through the whole unrolled inner loop.
GradientResult diff_md_gradient(const GameInstance& instance, const Eigen::VectorXd& theta_m,
                                const Eigen::VectorXd& theta_p0, int steps,
                                double lr_participant);

// d R_m / d theta_m at fixed theta_p (no learning influence).
Eigen::VectorXd naive_gradient(const GameInstance& instance, const Eigen::VectorXd& theta_m,
                               const Eigen::VectorXd& theta_p);

// d/d theta_m of R_m(theta_m, theta_p + lr_p * grad_p R_p(theta_m, theta_p)),
// including the dependence of the lookahead step on theta_m.
Eigen::VectorXd lola_gradient(const GameInstance& instance, const Eigen::VectorXd& theta_m,
                              const Eigen::VectorXd& theta_p, double lr_participant);

// sum_p eps_p * R_p / (N sigma), summed in index order.
Eigen::VectorXd es_estimator(const std::vector<Eigen::VectorXd>& perturbations,
                             const std::vector<double>& returns, double sigma);

// Centered ranks in [-0.5, 0.5]; ties broken by index.
std::vector<double> centered_ranks(const std::vector<double>& returns);

struct EsBatch {
  std::vector<Eigen::VectorXd> perturbations;
  std::vector<Eigen::VectorXd> participant_inits;
  std::vector<GameInstance> instances;
  std::vector<double> returns;  // Rbar_m per member
};

// Draws and evaluates one ES batch around theta_m.
EsBatch es_sample_batch(const Environment& env, const Eigen::VectorXd& theta_m,
                        const TrainConfig& config, Rng& rng);

GradientResult es_gradient(const Environment& env, const Eigen::VectorXd& theta_m,
                           const TrainConfig& config, Rng& rng);

struct MechanismUpdate {
  Eigen::VectorXd theta_m;
  double accumulated_return = 0.0;
};

MechanismUpdate diff_md_step(const Environment& env, const Eigen::VectorXd& theta_m,
                             const TrainConfig& config, Rng& rng);

MechanismUpdate es_md_step(const Environment& env, const Eigen::VectorXd& theta_m,
                           const TrainConfig& config, Rng& rng);

// theta_m + lr_m * lola_gradient at a single participant point.
Eigen::VectorXd lola_step(const GameInstance& instance, const Eigen::VectorXd& theta_m,
                          const Eigen::VectorXd& theta_p, double lr_mechanism,
                          double lr_participant);

// One LOLA outer step: lookahead gradients summed along a naive inner loop.
MechanismUpdate lola_outer_step(const Environment& env, const Eigen::VectorXd& theta_m,
                                const TrainConfig& config, Rng& rng);

// Rescales `grad` to L2 norm `max_norm` when it exceeds it (max_norm > 0).
Eigen::VectorXd clip_gradient(const Eigen::VectorXd& grad, double max_norm);

inline constexpr double kDivergenceBound = 1e6;

struct TrainResult {
  Eigen::VectorXd theta_m;
  std::vector<double> history;  // Rbar_m per outer step
};

TrainResult run_inner_outer(const Environment& env, Method method, const TrainConfig& config,
                            const std::optional<Eigen::VectorXd>& theta_m0 = std::nullopt);

}  // namespace shepherd

#endif  // SHEPHERD_TRAINING_HPP_
