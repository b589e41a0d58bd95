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

#include "shepherd/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "shepherd/parallel.hpp"

namespace shepherd {
namespace {

// Lane count used to differentiate a given game's mechanism.
template <class Game>
struct LanesFor;
template <>
struct LanesFor<MatrixGameMDP> {
  static constexpr int value = kNumGameStates;
};
template <>
struct LanesFor<PggSpec> {
  static constexpr int value = Eigen::Dynamic;
};

template <int L>
VecX<Dual<L>> constants(const Eigen::VectorXd& x) {
  return x.cast<Dual<L>>();
}

template <class Game>
GradientResult differentiate_inner_loop(const Game& game, const Eigen::VectorXd& theta_m,
                                        const Eigen::VectorXd& theta_p0, int steps,
                                        double lr_participant) {
  constexpr int L = LanesFor<Game>::value;
  using D = Dual<L>;
  const VecX<D> tm = make_variables<L>(theta_m);
  const auto trace = unroll_inner_loop<D>(mechanism_step_fn<D>(game, tm), constants<L>(theta_p0),
                                          steps, lr_participant);
  return {gradient_of(trace.accumulated_return, theta_m.size()),
          trace.accumulated_return.value()};
}

template <class Game>
Eigen::VectorXd differentiate_lookahead(const Game& game, const Eigen::VectorXd& theta_m,
                                        const Eigen::VectorXd& theta_p, double lr_participant) {
  constexpr int L = LanesFor<Game>::value;
  using D = Dual<L>;
  const auto step = mechanism_step_fn<D>(game, make_variables<L>(theta_m));
  const VecX<D> tp = constants<L>(theta_p);
  const StepResult<D> now = step(tp);
  VecX<D> ahead = tp;
  for (Eigen::Index i = 0; i < ahead.size(); ++i) {
    ahead[i] += now.participant_grad[i] * lr_participant;
    if (now.unit_box) ahead[i] = clamp(ahead[i], 0.0, 1.0);
  }
  return gradient_of(step(ahead).mechanism_return, theta_m.size());
}

template <class Game>
Eigen::VectorXd differentiate_direct(const Game& game, const Eigen::VectorXd& theta_m,
                                     const Eigen::VectorXd& theta_p) {
  constexpr int L = LanesFor<Game>::value;
  using D = Dual<L>;
  const auto step = mechanism_step_fn<D>(game, make_variables<L>(theta_m));
  return gradient_of(step(constants<L>(theta_p)).mechanism_return, theta_m.size());
}

double inner_return(const GameInstance& instance, const Eigen::VectorXd& theta_m,
                    const Eigen::VectorXd& theta_p0, int steps, double lr_participant) {
  return run_inner_loop<double>(instance, theta_m, theta_p0, steps, lr_participant)
      .accumulated_return;
}

void check_parameters(const Eigen::VectorXd& theta, int outer_step) {
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!std::isfinite(theta[i]) || std::abs(theta[i]) > kDivergenceBound) {
      throw NumericalError("mechanism parameters diverged at outer step " +
                           std::to_string(outer_step) + " (parameter " + std::to_string(i) +
                           " = " + std::to_string(theta[i]) + ")");
    }
  }
}

}  // namespace

std::string_view method_name(Method method) {
  switch (method) {
    case Method::DiffMD:
      return "diff-md";
    case Method::EsMD:
      return "es-md";
    case Method::Lola:
      return "lola";
  }
  return "unknown";
}

std::optional<Method> method_from_name(std::string_view name) {
  for (Method m : {Method::DiffMD, Method::EsMD, Method::Lola})
    if (method_name(m) == name) return m;
  return std::nullopt;
}

TrainConfig TrainConfig::matrix_game_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::pgg_defaults() {
  TrainConfig c;
  c.outer_steps = 5000;
  c.inner_steps = 10;
  c.lr_mechanism = 0.01;
  c.lr_participant = 0.1;
  return c;
}

void TrainConfig::validate() const {
  if (outer_steps < 1 || inner_steps < 1 || es_batch < 1)
    throw ConfigError("outer steps, inner steps and ES batch size must be >= 1");
  if (!(lr_mechanism > 0.0) || !(lr_participant > 0.0) || !(es_sigma > 0.0))
    throw ConfigError("learning rates and ES sigma must be positive");
  if (!(participant_init_std >= 0.0))
    throw ConfigError("participant init std must be nonnegative");
  if (!(grad_clip >= 0.0)) throw ConfigError("gradient clip must be nonnegative");
}

int mechanism_param_count(const Environment& env) {
  return std::holds_alternative<MatrixGameEnv>(env) ? kNumGameStates : kMechanismParams;
}

int participant_param_count(const Environment& env) {
  return std::holds_alternative<MatrixGameEnv>(env) ? kNumGameStates : kPggParticipants;
}

std::string environment_label(const Environment& env) {
  if (const auto* m = std::get_if<MatrixGameEnv>(&env)) {
    return m->mdp.game.name.empty() ? game_name(m->mdp.game) : m->mdp.game.name;
  }
  return "pgg";
}

TrainConfig default_config(const Environment& env) {
  return std::holds_alternative<MatrixGameEnv>(env) ? TrainConfig::matrix_game_defaults()
                                                    : TrainConfig::pgg_defaults();
}

GameInstance sample_instance(const Environment& env, Rng& rng) {
  if (const auto* m = std::get_if<MatrixGameEnv>(&env)) return m->mdp;
  const auto& pgg = std::get<PggEnv>(env);
  PggSpec spec = pgg.eval_spec;
  if (pgg.resample_endowments) {
    std::uniform_real_distribution<double> u(pgg.endowment_min, pgg.endowment_max);
    for (int i = 0; i < kPggParticipants; ++i) spec.endowments[i] = u(rng);
  }
  return spec;
}

GameInstance evaluation_instance(const Environment& env) {
  if (const auto* m = std::get_if<MatrixGameEnv>(&env)) return m->mdp;
  return std::get<PggEnv>(env).eval_spec;
}

Eigen::VectorXd sample_participant(const Environment& env, double init_std, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd theta(participant_param_count(env));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = init_std * normal(rng);
  // Direct propensities start at the same rho as the logit draw would give.
  if (const auto* pgg = std::get_if<PggEnv>(&env);
      pgg && pgg->eval_spec.propensity == Propensity::Direct)
    theta = theta.unaryExpr([](double x) { return sigmoid(x); });
  return theta;
}

Eigen::VectorXd initial_mechanism(const Environment& env, Rng& rng) {
  if (std::holds_alternative<MatrixGameEnv>(env)) return Eigen::VectorXd::Zero(kNumGameStates);
  return init_mechanism_net(rng).flatten();
}

GradientResult diff_md_gradient(const GameInstance& instance, const Eigen::VectorXd& theta_m,
                                const Eigen::VectorXd& theta_p0, int steps,
                                double lr_participant) {
  return std::visit(
      [&](const auto& game) {
        return differentiate_inner_loop(game, theta_m, theta_p0, steps, lr_participant);
      },
      instance);
}

Eigen::VectorXd naive_gradient(const GameInstance& instance, const Eigen::VectorXd& theta_m,
                               const Eigen::VectorXd& theta_p) {
  return std::visit(
      [&](const auto& game) { return differentiate_direct(game, theta_m, theta_p); }, instance);
}

Eigen::VectorXd lola_gradient(const GameInstance& instance, const Eigen::VectorXd& theta_m,
                              const Eigen::VectorXd& theta_p, double lr_participant) {
  return std::visit(
      [&](const auto& game) {
        return differentiate_lookahead(game, theta_m, theta_p, lr_participant);
      },
      instance);
}

Eigen::VectorXd clip_gradient(const Eigen::VectorXd& grad, double max_norm) {
  if (!(max_norm > 0.0)) return grad;
  const double norm = grad.norm();
  return norm > max_norm ? Eigen::VectorXd(grad * (max_norm / norm)) : grad;
}

Eigen::VectorXd es_estimator(const std::vector<Eigen::VectorXd>& perturbations,
                             const std::vector<double>& returns, double sigma) {
  if (perturbations.empty() || perturbations.size() != returns.size())
    throw ConfigError("es_estimator: perturbation/return count mismatch");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(perturbations.front().size());
  for (std::size_t p = 0; p < perturbations.size(); ++p) grad += perturbations[p] * returns[p];
  return grad / (static_cast<double>(perturbations.size()) * sigma);
}

std::vector<double> centered_ranks(const std::vector<double>& returns) {
  const std::size_t n = returns.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return returns[a] < returns[b]; });
  std::vector<double> ranks(n, 0.0);
  if (n < 2) return ranks;
  for (std::size_t r = 0; r < n; ++r)
    ranks[order[r]] = static_cast<double>(r) / static_cast<double>(n - 1) - 0.5;
  return ranks;
}

EsBatch es_sample_batch(const Environment& env, const Eigen::VectorXd& theta_m,
                        const TrainConfig& config, Rng& rng) {
  const auto n = static_cast<std::size_t>(config.es_batch);
  const std::uint64_t base = rng();
  EsBatch batch;
  batch.perturbations.resize(n);
  batch.participant_inits.resize(n);
  batch.instances.resize(n);
  batch.returns.resize(n);
  parallel_for(n, [&](std::size_t p) {
    // Antithetic pairs share a stream; the odd member mirrors the noise.
    const bool mirrored = config.es_antithetic && (p % 2 == 1);
    Rng member = make_rng(base, config.es_antithetic ? p / 2 : p);
    std::normal_distribution<double> normal(0.0, config.es_sigma);
    Eigen::VectorXd eps(theta_m.size());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = normal(member);
    if (mirrored) eps = -eps;
    batch.instances[p] = sample_instance(env, member);
    batch.participant_inits[p] = sample_participant(env, config.participant_init_std, member);
    batch.returns[p] = inner_return(batch.instances[p], theta_m + eps, batch.participant_inits[p],
                                    config.inner_steps, config.lr_participant);
    batch.perturbations[p] = std::move(eps);
  });
  return batch;
}

GradientResult es_gradient(const Environment& env, const Eigen::VectorXd& theta_m,
                           const TrainConfig& config, Rng& rng) {
  const EsBatch batch = es_sample_batch(env, theta_m, config, rng);
  const std::vector<double> fitness =
      config.es_rank_shaping ? centered_ranks(batch.returns) : batch.returns;
  GradientResult out;
  out.gradient = es_estimator(batch.perturbations, fitness, config.es_sigma);
  double total = 0.0;
  for (double r : batch.returns) total += r;
  out.accumulated_return = total / static_cast<double>(batch.returns.size());
  return out;
}

MechanismUpdate diff_md_step(const Environment& env, const Eigen::VectorXd& theta_m,
                             const TrainConfig& config, Rng& rng) {
  const GameInstance instance = sample_instance(env, rng);
  const Eigen::VectorXd theta_p0 = sample_participant(env, config.participant_init_std, rng);
  const GradientResult g =
      diff_md_gradient(instance, theta_m, theta_p0, config.inner_steps, config.lr_participant);
  return {theta_m + config.lr_mechanism * clip_gradient(g.gradient, config.grad_clip),
          g.accumulated_return};
}

MechanismUpdate es_md_step(const Environment& env, const Eigen::VectorXd& theta_m,
                           const TrainConfig& config, Rng& rng) {
  if (config.es_batch < 2) throw ConfigError("ES-MD needs a batch of at least 2");
  const GradientResult g = es_gradient(env, theta_m, config, rng);
  return {theta_m + config.lr_mechanism * clip_gradient(g.gradient, config.grad_clip),
          g.accumulated_return};
}

Eigen::VectorXd lola_step(const GameInstance& instance, const Eigen::VectorXd& theta_m,
                          const Eigen::VectorXd& theta_p, double lr_mechanism,
                          double lr_participant) {
  return theta_m + lr_mechanism * lola_gradient(instance, theta_m, theta_p, lr_participant);
}

MechanismUpdate lola_outer_step(const Environment& env, const Eigen::VectorXd& theta_m,
                                const TrainConfig& config, Rng& rng) {
  const GameInstance instance = sample_instance(env, rng);
  Eigen::VectorXd theta_p = sample_participant(env, config.participant_init_std, rng);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta_m.size());
  double accumulated = 0.0;
  for (int t = 0; t < config.inner_steps; ++t) {
    grad += lola_gradient(instance, theta_m, theta_p, config.lr_participant);
    const auto step = std::visit(
        [&](const auto& game) { return mechanism_step_fn<double>(game, theta_m)(theta_p); },
        instance);
    accumulated += step.mechanism_return;
    theta_p += config.lr_participant * step.participant_grad;
    if (step.unit_box) theta_p = theta_p.cwiseMax(0.0).cwiseMin(1.0);
  }
  return {theta_m + config.lr_mechanism * clip_gradient(grad, config.grad_clip), accumulated};
}

TrainResult run_inner_outer(const Environment& env, Method method, const TrainConfig& config,
                            const std::optional<Eigen::VectorXd>& theta_m0) {
  config.validate();
  if (method == Method::EsMD && config.es_batch < 2)
    throw ConfigError("ES-MD needs a batch of at least 2");
  Rng rng(config.seed);
  TrainResult result;
  result.theta_m = theta_m0 ? *theta_m0 : initial_mechanism(env, rng);
  if (result.theta_m.size() != mechanism_param_count(env))
    throw ConfigError("initial mechanism has the wrong parameter count");
  result.history.reserve(static_cast<std::size_t>(config.outer_steps));

  for (int t = 0; t < config.outer_steps; ++t) {
    MechanismUpdate u;
    switch (method) {
      case Method::DiffMD:
        u = diff_md_step(env, result.theta_m, config, rng);
        break;
      case Method::EsMD:
        u = es_md_step(env, result.theta_m, config, rng);
        break;
      case Method::Lola:
        u = lola_outer_step(env, result.theta_m, config, rng);
        break;
    }
    check_parameters(u.theta_m, t);
    if (!std::isfinite(u.accumulated_return))
      throw NumericalError("non-finite inner-loop return at outer step " + std::to_string(t));
    result.theta_m = std::move(u.theta_m);
    result.history.push_back(u.accumulated_return);
  }
  return result;
}

}  // namespace shepherd
