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

// shepherd: train, evaluate and serve mechanisms.
//
// Exit codes: 0 success, 2 usage, 3 data/IO, 4 numerical failure.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shepherd/checkpoint.hpp"
#include "shepherd/evalharness.hpp"
#include "shepherd/play_http.hpp"
#include "shepherd/playservice.hpp"
#include "shepherd/training.hpp"

namespace fs = std::filesystem;
using namespace shepherd;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct TrainArgs {
  std::string env = "game:PrisonersDilemma";
  std::string method = "diff-md";
  std::uint64_t seed = 0;
  std::string out = "checkpoint.json";
  std::string history;
  std::optional<int> outer_steps, inner_steps, es_batch;
  std::optional<double> lr_mechanism, lr_participant, es_sigma, grad_clip;
  bool es_antithetic = false;
  bool es_rank_shaping = false;
  std::string propensity = "direct";
  bool fixed_endowments = false;
};

struct EvalArgs {
  std::string env;
  std::vector<std::string> checkpoints;
  std::vector<std::string> baselines;
  bool default_baselines = false;
  std::optional<int> seeds, steps;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool svg = false;
};

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// Applies the PGG-only flags; matrix games reject them.
Environment configure_environment(const TrainArgs& a) {
  Environment env = parse_environment(a.env);
  if (auto* pgg = std::get_if<PggEnv>(&env)) {
    const auto prop = propensity_from_name(a.propensity);
    if (!prop) throw ConfigError("--propensity must be 'direct' or 'logit'");
    pgg->eval_spec.propensity = *prop;
    pgg->resample_endowments = !a.fixed_endowments;
  } else if (a.fixed_endowments || a.propensity != "direct") {
    throw ConfigError("--propensity and --fixed-endowments only apply to --env pgg");
  }
  return env;
}

int cmd_train(const TrainArgs& a) {
  const Environment env = configure_environment(a);
  const auto method = method_from_name(a.method);
  if (!method) throw ConfigError("--method must be diff-md, es-md or lola");

  TrainConfig c = default_config(env);
  c.seed = a.seed;
  if (a.outer_steps) c.outer_steps = *a.outer_steps;
  if (a.inner_steps) c.inner_steps = *a.inner_steps;
  if (a.es_batch) c.es_batch = *a.es_batch;
  if (a.lr_mechanism) c.lr_mechanism = *a.lr_mechanism;
  if (a.lr_participant) c.lr_participant = *a.lr_participant;
  if (a.es_sigma) c.es_sigma = *a.es_sigma;
  if (a.grad_clip) c.grad_clip = *a.grad_clip;
  c.es_antithetic = a.es_antithetic;
  c.es_rank_shaping = a.es_rank_shaping;

  const TrainResult r = run_inner_outer(env, *method, c);
  save_checkpoint(make_checkpoint(env, *method, c, r), a.out);
  fs::path history = a.history;
  if (history.empty()) {
    history = fs::path(a.out);
    history.replace_filename(fs::path(a.out).stem().string() + "_history.csv");
  }
  write_history_csv(r.history, c.inner_steps, history);

  std::cout << "checkpoint: " << a.out << "\n"
            << "history: " << history.string() << "\n"
            << "final mean inner return: " << format_double(r.history.back() / c.inner_steps)
            << "\n";
  return 0;
}

int cmd_eval(const EvalArgs& a) {
  std::optional<Environment> env;
  if (!a.env.empty()) env = parse_environment(a.env);

  std::vector<Mechanism> mechanisms;
  for (const auto& path : a.checkpoints) {
    const Checkpoint c = load_checkpoint(path);
    if (!env) env = c.env;
    if (environment_label(*env) != environment_label(c.env))
      throw ConfigError("checkpoint " + path + " was trained on " + environment_label(c.env) +
                        ", not " + environment_label(*env));
    // A checkpoint carries its own endowment and propensity settings.
    if (std::holds_alternative<PggEnv>(c.env)) env = c.env;
    const std::string label = a.checkpoints.size() == 1 ? "IO-Loop" : fs::path(path).stem().string();
    mechanisms.push_back(checkpoint_mechanism(c, label));
  }
  if (!env) throw ConfigError("eval needs --env or at least one --checkpoint");
  const bool matrix = std::holds_alternative<MatrixGameEnv>(*env);

  auto add_baseline = [&](const std::string& name) {
    if (matrix) {
      const auto s = FixedStrategy::from_name(name);
      if (!s) throw ConfigError("unknown matrix-game strategy '" + name + "'");
      mechanisms.push_back(Mechanism::fixed(*s));
    } else {
      const auto r = redistribution_from_name(name);
      if (!r) throw ConfigError("unknown redistribution rule '" + name + "'");
      mechanisms.push_back(Mechanism::baseline(*r));
    }
  };
  for (const auto& b : a.baselines) add_baseline(b);
  if (a.default_baselines) {
    if (matrix) {
      for (auto s : comparison_strategies()) mechanisms.push_back(Mechanism::fixed(s));
    } else {
      for (auto r : all_redistributions()) mechanisms.push_back(Mechanism::baseline(r));
    }
  }
  if (mechanisms.empty()) throw ConfigError("nothing to evaluate: give --checkpoint or --baseline");

  EvalConfig ec = default_eval_config(*env);
  ec.seed = a.seed;
  if (a.seeds) ec.n_seeds = *a.seeds;
  if (a.steps) ec.steps = *a.steps;
  const SuiteResult suite = compare_suite(*env, mechanisms, ec);

  fs::create_directories(a.out_dir);
  const std::string label = environment_label(*env);
  for (const auto& curve : suite.curves) {
    const fs::path csv = fs::path(a.out_dir) / curve_file_name(label, curve.label, ec.n_seeds);
    std::optional<fs::path> svg;
    if (a.svg) svg = fs::path(csv).replace_extension(".svg");
    export_curves({curve}, csv, svg);
  }
  std::printf("%-22s %14s %12s %14s\n", "mechanism", "final_mean", "final_se", "mean_return");
  for (const auto& s : suite.summary)
    std::printf("%-22s %14.6f %12.6f %14.6f\n", s.label.c_str(), s.final_mean,
                s.final_std_error, s.area / ec.steps);
  return 0;
}

int cmd_games(const std::string& name) {
  for (const auto& g : enumerate_games()) {
    if (!name.empty() && g.name != name) continue;
    std::printf("%-18s R=%d S=%d T=%d P=%d\n", g.name.c_str(), g.reward, g.sucker, g.temptation,
                g.punishment);
    if (!name.empty()) return 0;
  }
  if (!name.empty()) throw ConfigError("unknown game '" + name + "'");
  return 0;
}

int cmd_inspect(const std::string& path) {
  const Checkpoint c = load_checkpoint(path);
  std::cout << "environment: " << environment_label(c.env) << "\n"
            << "method: " << method_name(c.method) << "\n"
            << "seed: " << c.config.seed << "\n"
            << "outer steps: " << c.config.outer_steps << ", inner steps: " << c.config.inner_steps
            << "\n"
            << "learning rates: mechanism " << format_double(c.config.lr_mechanism)
            << ", participant " << format_double(c.config.lr_participant) << "\n"
            << "history: " << c.history_length << " entries, digest " << std::hex
            << c.history_digest << std::dec << "\n";
  if (std::holds_alternative<MatrixGameEnv>(c.env)) {
    const OneMemoryPolicy p{Vec5<double>(c.theta_m)};
    const Vec5<double> probs = p.coop_probs();
    const char* states[] = {"s0", "CC", "CD", "DC", "DD"};
    std::cout << "cooperation probabilities:";
    for (int s = 0; s < kNumGameStates; ++s)
      std::cout << " " << states[s] << "=" << format_double(probs[s]);
    std::cout << "\n";
  } else {
    std::cout << "mechanism net: " << c.theta_m.size() << " parameters, norm "
              << format_double(c.theta_m.norm()) << "\n";
  }
  return 0;
}

PlayServer* g_server = nullptr;

int cmd_serve(const ServeArgs& a) {
  SessionManager sessions;
  PlayServer server(sessions);
  const int port = server.bind(a.host, a.port);
  if (port < 0) throw IoError("cannot bind " + a.host + ":" + std::to_string(a.port));
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::cout << "serving on http://" << a.host << ":" << port << std::endl;
  server.serve();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train, evaluate and serve learning-shepherding mechanisms"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a mechanism with the inner-outer loop");
  train->add_option("--env", ta.env, "game:<name> or pgg")->capture_default_str();
  train->add_option("--method", ta.method, "diff-md, es-md or lola")->capture_default_str();
  train->add_option("--seed", ta.seed)->capture_default_str();
  train->add_option("--out", ta.out, "checkpoint path")->capture_default_str();
  train->add_option("--history", ta.history, "history CSV path (default <out>_history.csv)");
  train->add_option("--outer-steps", ta.outer_steps, "T_m");
  train->add_option("--inner-steps", ta.inner_steps, "T_p");
  train->add_option("--lr-mechanism", ta.lr_mechanism, "gamma_m");
  train->add_option("--lr-participant", ta.lr_participant, "gamma_p");
  train->add_option("--es-batch", ta.es_batch, "N_p");
  train->add_option("--es-sigma", ta.es_sigma, "sigma_m");
  train->add_option("--grad-clip", ta.grad_clip, "outer gradient norm cap, 0 disables");
  train->add_flag("--es-antithetic", ta.es_antithetic, "mirrored ES perturbations");
  train->add_flag("--es-rank-shaping", ta.es_rank_shaping, "centered-rank ES fitness");
  train->add_option("--propensity", ta.propensity, "pgg participants: direct or logit")
      ->capture_default_str();
  train->add_flag("--fixed-endowments", ta.fixed_endowments,
                  "pgg: train on the evaluation endowments only");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate mechanisms against learning participants");
  eval->add_option("--env", ea.env, "game:<name> or pgg");
  eval->add_option("--checkpoint", ea.checkpoints, "trained checkpoint (repeatable)");
  eval->add_option("--baseline", ea.baselines, "baseline name (repeatable)");
  eval->add_flag("--baselines", ea.default_baselines, "add the standard comparison baselines");
  eval->add_option("--seeds", ea.seeds, "number of participant seeds");
  eval->add_option("--steps", ea.steps, "participant learning steps");
  eval->add_option("--seed", ea.seed)->capture_default_str();
  eval->add_option("--out-dir", ea.out_dir)->capture_default_str();
  eval->add_flag("--svg", ea.svg, "also write an SVG plot per curve");

  std::string game_name_arg;
  auto* games = app.add_subcommand("games", "List the 12 canonical matrix games");
  games->add_option("--name", game_name_arg, "show a single game");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Summarize a checkpoint");
  inspect->add_option("checkpoint", inspect_path)->required();

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the human-play session server");
  serve->add_option("--host", sa.host)->capture_default_str();
  serve->add_option("--port", sa.port)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) return cmd_train(ta);
    if (*eval) return cmd_eval(ea);
    if (*games) return cmd_games(game_name_arg);
    if (*inspect) return cmd_inspect(inspect_path);
    if (*serve) return cmd_serve(sa);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const PlayError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
