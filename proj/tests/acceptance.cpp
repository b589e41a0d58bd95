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

// Acceptance gate. Runs criteria 1-10 and prints one PASS/FAIL line each.
//
//   acceptance            run everything
//   acceptance 1 3 8      run a subset (9 implies 4 and 7)

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shepherd/checkpoint.hpp"
#include "shepherd/evalharness.hpp"
#include "shepherd/play_http.hpp"
#include "shepherd/training.hpp"

using namespace shepherd;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

Verdict verdict(bool pass, std::string detail) { return {pass, std::move(detail)}; }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

Eigen::VectorXd randn(Eigen::Index n, Rng& rng, double std = 1.0) {
  std::normal_distribution<double> d(0.0, std);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

Environment game_env(const std::string& name) { return MatrixGameEnv{MatrixGameMDP{*find_game(name)}}; }

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "shepherd_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Relative error of a gradient against its finite-difference estimate, in the
// infinity norm so that tiny components do not dominate.
double gradient_rel_err(const Eigen::VectorXd& g, const Eigen::VectorXd& fd) {
  return (g - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
}

Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Trained artifacts shared by criteria 4, 7, 9 and 10.

struct TrainedRun {
  std::string checkpoint;
  std::string history_csv;
  std::string curves_csv;
  std::string aggregate_csv;
  fs::path checkpoint_path;
  LearningCurve curve;
  std::vector<LearningCurve> baselines;
};

TrainedRun train_and_evaluate(const Environment& env, Method method, const TrainConfig& config,
                              const std::vector<Mechanism>& baselines, const std::string& tag) {
  const TrainResult r = run_inner_outer(env, method, config);
  TrainedRun out;
  const Checkpoint ckpt = make_checkpoint(env, method, config, r);
  out.checkpoint_path = workdir() / (tag + ".json");
  save_checkpoint(ckpt, out.checkpoint_path);
  out.checkpoint = slurp(out.checkpoint_path);
  const fs::path hist = workdir() / (tag + "_history.csv");
  write_history_csv(r.history, config.inner_steps, hist);
  out.history_csv = slurp(hist);

  const EvalConfig ec = default_eval_config(env);
  std::vector<Mechanism> all = {checkpoint_mechanism(load_checkpoint(out.checkpoint_path))};
  all.insert(all.end(), baselines.begin(), baselines.end());
  const SuiteResult suite = compare_suite(env, all, ec);
  const fs::path csv = workdir() / curve_file_name(environment_label(env), tag, ec.n_seeds);
  export_curves(suite.curves, csv);
  out.curves_csv = slurp(csv);
  out.aggregate_csv = slurp(aggregate_path(csv));
  out.curve = suite.curves.front();
  out.baselines.assign(suite.curves.begin() + 1, suite.curves.end());
  return out;
}

std::vector<Mechanism> fixed_baselines() {
  std::vector<Mechanism> out;
  for (auto s : comparison_strategies()) out.push_back(Mechanism::fixed(s));
  return out;
}

std::vector<Mechanism> pgg_baselines() {
  std::vector<Mechanism> out;
  for (auto r : all_redistributions()) out.push_back(Mechanism::baseline(r));
  return out;
}

std::string curve_table(const TrainedRun& run) {
  std::string s = run.curve.label + "=" + fmt("%.4f", run.curve.final_mean());
  for (const auto& b : run.baselines) s += " " + b.label + "=" + fmt("%.4f", b.final_mean());
  return s;
}

double best_baseline(const TrainedRun& run) {
  double best = -1e300;
  for (const auto& b : run.baselines) best = std::max(best, b.final_mean());
  return best;
}

TrainedRun pd_run(const std::string& tag) {
  TrainConfig c = TrainConfig::matrix_game_defaults();
  c.outer_steps = 2000;
  return train_and_evaluate(game_env("PrisonersDilemma"), Method::DiffMD, c, fixed_baselines(), tag);
}

TrainedRun pgg_run(const std::string& tag) {
  return train_and_evaluate(PggEnv{}, Method::DiffMD, TrainConfig::pgg_defaults(), pgg_baselines(),
                            tag);
}

std::optional<TrainedRun> g_pd, g_pgg;

const TrainedRun& pd_result() {
  if (!g_pd) g_pd = pd_run("pd_diffmd");
  return *g_pd;
}

const TrainedRun& pgg_result() {
  if (!g_pgg) g_pgg = pgg_run("pgg_diffmd");
  return *g_pgg;
}

// ---------------------------------------------------------------------------

Verdict criterion1() {
  Rng rng(101);
  double worst = 0.0;
  std::string where;
  for (const char* name : {"PrisonersDilemma", "StagHunt", "Chicken"}) {
    const Environment env = game_env(name);
    const TrainConfig c = default_config(env);
    for (int k = 0; k < 100; ++k) {
      const GameInstance inst = sample_instance(env, rng);
      const Eigen::VectorXd tm = randn(kNumGameStates, rng);
      const Eigen::VectorXd tp = sample_participant(env, c.participant_init_std, rng);
      const auto g = diff_md_gradient(inst, tm, tp, c.inner_steps, c.lr_participant);
      const auto fd = central_gradient(
          [&](const Eigen::VectorXd& m) {
            return run_inner_loop<double>(inst, m, tp, c.inner_steps, c.lr_participant)
                .accumulated_return;
          },
          tm);
      const double e = gradient_rel_err(g.gradient, fd);
      if (e > worst) {
        worst = e;
        where = name;
      }
    }
  }
  const Environment env = PggEnv{};
  const TrainConfig c = default_config(env);
  for (int k = 0; k < 100; ++k) {
    const GameInstance inst = sample_instance(env, rng);
    const Eigen::VectorXd tm = initial_mechanism(env, rng);
    const Eigen::VectorXd tp = sample_participant(env, c.participant_init_std, rng);
    const auto g = diff_md_gradient(inst, tm, tp, c.inner_steps, c.lr_participant);
    const auto fd = central_gradient(
        [&](const Eigen::VectorXd& m) {
          return run_inner_loop<double>(inst, m, tp, c.inner_steps, c.lr_participant)
              .accumulated_return;
        },
        tm);
    const double e = gradient_rel_err(g.gradient, fd);
    if (e > worst) {
      worst = e;
      where = "pgg";
    }
  }
  return verdict(worst < 1e-4, "max relative error " + fmt("%.3e", worst) + " (" + where + ")");
}

Verdict criterion2() {
  Rng rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto games = enumerate_games();
  constexpr int kEpisodes = 100000, kHorizon = 500;
  int failures = 0;
  double worst_z = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    const MatrixGameMDP mdp{games[static_cast<std::size_t>(pair) % games.size()]};
    Vec5<double> a, b;
    for (int s = 0; s < kNumGameStates; ++s) {
      a[s] = u(rng);
      b[s] = u(rng);
    }
    const double exact = matrix_game_returns_from_probs<double>(mdp, a, b).mechanism;
    const Vec5<double> rm = mdp.mechanism_rewards();
    double sum = 0.0, sumsq = 0.0;
    for (int e = 0; e < kEpisodes; ++e) {
      int s = kStart;
      double ret = 0.0, disc = 1.0;
      for (int t = 0; t < kHorizon; ++t) {
        const bool cm = u(rng) < a[s];
        const bool cp = u(rng) < b[s];
        s = cm ? (cp ? kCC : kCD) : (cp ? kDC : kDD);
        ret += disc * rm[s];
        disc *= mdp.discount;
      }
      ret *= 1.0 - mdp.discount;
      sum += ret;
      sumsq += ret * ret;
    }
    const double mean = sum / kEpisodes;
    const double se = std::sqrt((sumsq / kEpisodes - mean * mean) / (kEpisodes - 1));
    const double z = std::abs(mean - exact) / se;
    worst_z = std::max(worst_z, z);
    failures += z > 3.0;
  }
  return verdict(failures == 0, "max |z| " + fmt("%.2f", worst_z) + " over 20 pairs");
}

Verdict criterion3() {
  std::array<int, 4> p = {-3, -2, -1, 0};
  std::set<std::array<int, 4>> classes;
  do {
    const std::array<int, 4> g = p;
    const std::array<int, 4> image = {p[3], p[2], p[1], p[0]};
    classes.insert(std::max(g, image));
  } while (std::next_permutation(p.begin(), p.end()));
  const auto games = enumerate_games();
  std::set<std::array<int, 4>> produced;
  for (const auto& g : games) {
    const auto key = g.payoffs();
    produced.insert(std::max(key, relabel(g).payoffs()));
  }
  const bool ok = games.size() == 12 && classes.size() == 12 && produced == classes;
  return verdict(ok, std::to_string(games.size()) + " games, " + std::to_string(classes.size()) +
                         " brute-force classes");
}

Verdict criterion4() {
  const TrainedRun& run = pd_result();
  const double margin = run.curve.final_mean() - best_baseline(run);
  return verdict(margin >= 0.1, "margin " + fmt("%.4f", margin) + "; " + curve_table(run));
}

Verdict criterion5() {
  bool ok = true;
  std::string detail;
  for (const auto& g : enumerate_games()) {
    if (g.name == "PrisonersDilemma") continue;
    const Environment env = game_env(g.name);
    const TrainConfig c = default_config(env);
    const TrainResult r = run_inner_outer(env, Method::DiffMD, c);
    std::vector<Mechanism> all = {trained_mechanism(env, r.theta_m)};
    for (auto& b : fixed_baselines()) all.push_back(b);
    const SuiteResult suite = compare_suite(env, all, default_eval_config(env));
    double best = -1e300;
    for (std::size_t k = 1; k < suite.summary.size(); ++k)
      best = std::max(best, suite.summary[k].final_mean);
    const double gap = suite.summary[0].final_mean - best;
    ok = ok && gap >= -0.1;
    detail += g.name + " " + fmt("%+.3f", gap) + "; ";
  }
  return verdict(ok, "IO-Loop minus best baseline: " + detail);
}

struct CosineCount {
  int positive = 0;
  double min_cos = 1.0;
};

// ES estimate against Diff-MD averaged over the same participant draws, at 100 random points.
CosineCount es_cosines(const Environment& env, const TrainConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  CosineCount out;
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd tm = randn(kNumGameStates, rng);
    const EsBatch batch = es_sample_batch(env, tm, c, rng);
    const Eigen::VectorXd es = es_estimator(batch.perturbations, batch.returns, c.es_sigma);
    Eigen::VectorXd exact = Eigen::VectorXd::Zero(tm.size());
    for (std::size_t p = 0; p < batch.participant_inits.size(); ++p)
      exact += diff_md_gradient(batch.instances[p], tm, batch.participant_inits[p], c.inner_steps,
                                c.lr_participant)
                   .gradient;
    exact /= static_cast<double>(batch.participant_inits.size());
    const double cos = es.dot(exact) / std::max(es.norm() * exact.norm(), 1e-300);
    out.positive += cos > 0.0;
    out.min_cos = std::min(out.min_cos, cos);
  }
  return out;
}

Verdict criterion6() {
  const Environment env = game_env("PrisonersDilemma");
  TrainConfig c = default_config(env);
  const CosineCount plain = es_cosines(env, c, 606);
  // Informational only; the verdict uses the default estimator.
  TrainConfig anti = c;
  anti.es_antithetic = true;
  const CosineCount mirrored = es_cosines(env, anti, 607);

  c.outer_steps = 500;
  const TrainedRun run = train_and_evaluate(env, Method::EsMD, c, fixed_baselines(), "pd_esmd");
  const double margin = run.curve.final_mean() - best_baseline(run);
  return verdict(plain.positive >= 95 && margin >= 0.05,
                 std::to_string(plain.positive) + "/100 positive cosines (min " +
                     fmt("%.3f", plain.min_cos) + "; antithetic " + std::to_string(mirrored.positive) +
                     "/100); ES-MD margin " + fmt("%.4f", margin) + "; " + curve_table(run));
}

Verdict criterion7() {
  const TrainedRun& run = pgg_result();
  const double w = run.curve.final_mean();
  const bool ok = w > best_baseline(run) && w > 0.55 && w <= 0.88;
  return verdict(ok, curve_table(run) + " (50 seeds, floor 0.55, ceiling 0.88)");
}

Verdict criterion8() {
  Rng rng(808);
  double worst_bits = 0.0, worst_fd = 0.0;
  const double lr_m = 0.1;
  for (const auto& g : enumerate_games()) {
    const Environment env = MatrixGameEnv{MatrixGameMDP{g}};
    const GameInstance inst = evaluation_instance(env);
    for (int k = 0; k < 10; ++k) {
      const Eigen::VectorXd tm = randn(kNumGameStates, rng), tp = randn(kNumGameStates, rng);
      const Eigen::VectorXd a = lola_step(inst, tm, tp, lr_m, 0.0);
      const Eigen::VectorXd b = tm + lr_m * naive_gradient(inst, tm, tp);
      worst_bits = std::max(worst_bits, (a - b).cwiseAbs().maxCoeff());

      const double lr_p = default_config(env).lr_participant;
      const Eigen::VectorXd lg = lola_gradient(inst, tm, tp, lr_p);
      const auto fd = central_gradient(
          [&](const Eigen::VectorXd& m) {
            const Eigen::VectorXd ahead = tp + lr_p * participant_grad<double>(inst, m, tp);
            return run_inner_loop<double>(inst, m, ahead, 1, 0.0).accumulated_return;
          },
          tm);
      worst_fd = std::max(worst_fd, gradient_rel_err(lg, fd));
    }
  }
  const Environment env = PggEnv{};
  for (int k = 0; k < 10; ++k) {
    const GameInstance inst = sample_instance(env, rng);
    const Eigen::VectorXd tm = initial_mechanism(env, rng);
    const Eigen::VectorXd tp = sample_participant(env, 1.0, rng);
    const Eigen::VectorXd a = lola_step(inst, tm, tp, lr_m, 0.0);
    const Eigen::VectorXd b = tm + lr_m * naive_gradient(inst, tm, tp);
    worst_bits = std::max(worst_bits, (a - b).cwiseAbs().maxCoeff());
  }
  return verdict(worst_bits < 1e-12 && worst_fd < 1e-4,
                 "gamma_p=0 max diff " + fmt("%.1e", worst_bits) + "; lookahead FD rel error " +
                     fmt("%.2e", worst_fd));
}

Verdict criterion9() {
  const TrainedRun& pd = pd_result();
  const TrainedRun& pgg = pgg_result();
  const TrainedRun pd2 = pd_run("pd_diffmd_rerun");
  const TrainedRun pgg2 = pgg_run("pgg_diffmd_rerun");
  auto same = [](const TrainedRun& a, const TrainedRun& b) {
    return a.checkpoint == b.checkpoint && a.history_csv == b.history_csv &&
           a.curves_csv == b.curves_csv && a.aggregate_csv == b.aggregate_csv;
  };
  const bool ok = same(pd, pd2) && same(pgg, pgg2);
  return verdict(ok, std::string("PD ") + (same(pd, pd2) ? "identical" : "DIFFERS") + ", PGG " +
                         (same(pgg, pgg2) ? "identical" : "DIFFERS"));
}

// --- criterion 10 ----------------------------------------------------------

struct Bots {
  SessionManager& sm;
  std::string base;
  std::vector<std::string> tokens;
  bool adversarial = false;
  bool leaked = false;
  bool early = false;

  ApiResponse call(const std::string& method, const std::string& path, const Json& body,
                   std::map<std::string, std::string> query = {}) {
    return handle_api_request(sm, {method, base + path, std::move(query), body.is_null() ? "" : body.dump()});
  }

  std::vector<Json> round_start{};

  // A seat's view with the fields that may legitimately move while a round is open removed.
  Json public_view(std::size_t seat) {
    Json v = Json::parse(call("GET", "/state", nullptr, {{"token", tokens[seat]}}).body);
    for (const char* k : {"waiting_for", "seconds_remaining", "submitted", "own_contribution"}) v.erase(k);
    return v;
  }

  // Other seats' submissions must not change what a seat can see until the round resolves.
  void poll(std::size_t resolved_rounds) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const Json v = public_view(i);
      if (v["outcomes"].size() != resolved_rounds) early = true;
      if (round_start.size() == tokens.size() && v != round_start[i]) leaked = true;
    }
  }

  // Submits one round; returns the resolved welfare.
  double round(const Vec4<double>& rho, std::size_t resolved_rounds) {
    if (adversarial) {
      round_start.clear();
      for (std::size_t i = 0; i < tokens.size(); ++i) round_start.push_back(public_view(i));
    }
    Json last;
    for (int i = 0; i < kSeats; ++i) {
      if (adversarial) poll(resolved_rounds);
      const ApiResponse r = call("POST", "/contribute", Json{{"token", tokens[i]}, {"rho", rho[i]}});
      if (r.status != 200) throw Error("contribute failed: " + r.body);
      last = Json::parse(r.body);
    }
    if (!last["resolved"].get<bool>()) throw Error("round did not resolve");
    return last["outcome"]["welfare"].get<double>();
  }
};

// Contribution fractions along an evaluation trace.
std::vector<Vec4<double>> trace_contributions(const InnerLoopTrace<double>& trace, int rounds) {
  std::vector<Vec4<double>> out;
  for (int t = 0; t < rounds; ++t) {
    const Eigen::VectorXd& tp = trace.participant_params[static_cast<std::size_t>(t)];
    Vec4<double> rho;
    for (int i = 0; i < kSeats; ++i) rho[i] = std::clamp(tp[i], 0.0, 1.0);
    out.push_back(rho);
  }
  return out;
}

Verdict criterion10() {
  const TrainedRun& pgg = pgg_result();
  const Environment env = PggEnv{};
  EvalConfig ec = default_eval_config(env);
  ec.steps = kRoundsPerPhase;
  const Mechanism trained = checkpoint_mechanism(load_checkpoint(pgg.checkpoint_path));
  const auto uniform_trace = evaluate_seed(env, Mechanism::baseline(Redistribution::Uniform), ec, 0);
  const auto trained_trace = evaluate_seed(env, trained, ec, 1);
  const auto uniform_rho = trace_contributions(uniform_trace, kRoundsPerPhase);
  const auto trained_rho = trace_contributions(trained_trace, kRoundsPerPhase);

  double worst = 0.0;
  std::vector<double> quiet_welfare, noisy_welfare;
  bool leaked = false, early = false;
  for (bool adversarial : {false, true}) {
    SessionManager sm(steady_play_clock(), 10);
    const Json spec{{"seed", 0},
                    {"timeout_seconds", 3600},
                    {"mechanisms", {"checkpoint:" + pgg.checkpoint_path.string(), "Random"}}};
    const ApiResponse created = handle_api_request(sm, {"POST", "/sessions", {}, spec.dump()});
    if (created.status != 201) return verdict(false, "session creation failed: " + created.body);
    Bots bots{sm, "/sessions/" + Json::parse(created.body)["session"].get<std::string>(), {}};
    bots.adversarial = adversarial;
    for (int i = 0; i < kSeats; ++i)
      bots.tokens.push_back(
          Json::parse(bots.call("POST", "/join", Json{{"name", "bot" + std::to_string(i)}}).body)["token"]);

    std::vector<double>& welfare = adversarial ? noisy_welfare : quiet_welfare;
    for (int t = 0; t < kRoundsPerPhase; ++t) {
      const double w = bots.round(uniform_rho[static_cast<std::size_t>(t)], welfare.size());
      welfare.push_back(w);
      if (!adversarial)
        worst = std::max(worst, std::abs(w - uniform_trace.mechanism_returns[static_cast<std::size_t>(t)]));
    }
    for (int t = 0; t < kRoundsPerPhase; ++t) {
      const double w = bots.round(trained_rho[static_cast<std::size_t>(t)], welfare.size());
      welfare.push_back(w);
      if (!adversarial)
        worst = std::max(worst, std::abs(w - trained_trace.mechanism_returns[static_cast<std::size_t>(t)]));
    }
    leaked = leaked || bots.leaked;
    early = early || bots.early;
  }
  const bool same = quiet_welfare == noisy_welfare;
  const bool ok = worst <= 1e-9 && same && !leaked && !early;
  return verdict(ok, "max welfare diff " + fmt("%.1e", worst) + " over Uniform and checkpoint phases; " +
                         "adversarial poller: " + (same ? "same outcomes" : "OUTCOMES DIFFER") +
                         (leaked ? ", pending contribution leaked" : "") +
                         (early ? ", round visible before resolution" : ""));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = verdict(false, std::string("error: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s  [%.1fs] %s\n", id, v.pass ? "PASS" : "FAIL", secs,
                v.detail.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
