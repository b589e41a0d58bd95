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

#include <filesystem>
#include <fstream>
#include <random>

#include "shepherd/evalharness.hpp"

using namespace shepherd;
namespace fs = std::filesystem;

namespace {

Environment pd_env() { return MatrixGameEnv{MatrixGameMDP{*find_game("PrisonersDilemma")}}; }

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("shepherd_eval_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("fixed strategies in the prisoner's dilemma") {
  const Environment env = pd_env();
  EvalConfig c = default_eval_config(env);
  c.n_seeds = 5;
  const auto alld = evaluate_mechanism(env, Mechanism::fixed({FixedStrategyKind::AllD}), c);
  const auto allc = evaluate_mechanism(env, Mechanism::fixed({FixedStrategyKind::AllC}), c);
  // Learning participants defect against both; AllD pins the outcome to P, AllC to S.
  CHECK(std::abs(alld.final_mean() + 2.0) < 0.1);
  CHECK(std::abs(allc.final_mean() + 3.0) < 0.1);
}

TEST_CASE("Uniform redistribution curve never increases") {
  const Environment env = PggEnv{};
  EvalConfig c = default_eval_config(env);
  c.n_seeds = 10;
  const auto curve = evaluate_mechanism(env, Mechanism::baseline(Redistribution::Uniform), c);
  for (Eigen::Index t = 1; t < curve.mean.size(); ++t)
    CHECK(curve.mean[t] <= curve.mean[t - 1] + 1e-12);
}

TEST_CASE("one seed has zero standard error") {
  const Environment env = pd_env();
  EvalConfig c;
  c.n_seeds = 1;
  c.steps = 4;
  const auto curve = evaluate_mechanism(env, Mechanism::fixed({FixedStrategyKind::TitForTat}), c);
  CHECK(curve.std_error.isZero());
  CHECK(curve.is_consistent());
}

TEST_CASE("evaluation is deterministic and seeds are paired across mechanisms") {
  const Environment env = PggEnv{};
  std::mt19937_64 rng(3);
  const Mechanism net = trained_mechanism(env, init_mechanism_net(rng).flatten());
  EvalConfig c = default_eval_config(env);
  c.n_seeds = 4;
  const auto a = evaluate_mechanism(env, net, c);
  const auto b = evaluate_mechanism(env, net, c);
  CHECK(a.returns == b.returns);

  // Same seed index, same participant initialization regardless of mechanism.
  const auto t1 = evaluate_seed(env, net, c, 2);
  const auto t2 = evaluate_seed(env, Mechanism::baseline(Redistribution::Uniform), c, 2);
  CHECK(t1.participant_params.front() == t2.participant_params.front());
  const auto t3 = evaluate_seed(env, net, c, 3);
  CHECK(t1.participant_params.front() != t3.participant_params.front());
}

TEST_CASE("evaluation does not modify a trained mechanism") {
  const Environment env = pd_env();
  Eigen::VectorXd theta(5);
  theta << 0.1, 0.2, -0.3, 0.4, -0.5;
  const Mechanism m = trained_mechanism(env, theta);
  EvalConfig c;
  c.n_seeds = 3;
  c.steps = 5;
  evaluate_mechanism(env, m, c);
  CHECK(std::get<OneMemoryPolicy>(m.policy).params == Vec5<double>(theta));
}

TEST_CASE("incompatible mechanisms are rejected") {
  EvalConfig c;
  CHECK_THROWS_AS(evaluate_mechanism(pd_env(), Mechanism::baseline(Redistribution::Uniform), c),
                  ConfigError);
  CHECK_THROWS_AS(evaluate_mechanism(PggEnv{}, Mechanism::fixed({FixedStrategyKind::AllC}), c),
                  ConfigError);
  c.n_seeds = 0;
  CHECK_THROWS_AS(evaluate_mechanism(pd_env(), Mechanism::fixed({FixedStrategyKind::AllC}), c),
                  ConfigError);
}

TEST_CASE("CSV export has one row per seed and step and round-trips") {
  const fs::path dir = scratch_dir("csv");
  const Environment env = pd_env();
  EvalConfig c;
  c.n_seeds = 2;
  c.steps = 3;
  const auto suite = compare_suite(
      env, {Mechanism::fixed({FixedStrategyKind::TitForTat}), Mechanism::fixed({FixedStrategyKind::WinStayLoseShift})},
      c);
  const fs::path csv = dir / curve_file_name("PrisonersDilemma", "fixed", 2);
  export_curves(suite.curves, csv, dir / "curves.svg");
  CHECK(csv.filename() == "PrisonersDilemma_fixed_2.csv");
  CHECK(fs::exists(aggregate_path(csv)));
  CHECK(fs::exists(dir / "curves.svg"));

  std::ifstream in(csv);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * 2 * 3);

  const auto loaded = load_curves(csv);
  REQUIRE(loaded.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(loaded[k].label == suite.curves[k].label);
    CHECK((loaded[k].returns - suite.curves[k].returns).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(loaded[k].is_consistent());
  }
  CHECK(suite.summary[0].area == doctest::Approx(suite.curves[0].mean.sum()));
}

TEST_CASE("loading rejects a tampered aggregate") {
  const fs::path dir = scratch_dir("tamper");
  EvalConfig c;
  c.n_seeds = 2;
  c.steps = 2;
  const auto curve = evaluate_mechanism(pd_env(), Mechanism::fixed({FixedStrategyKind::AllC}), c);
  const fs::path csv = dir / "x.csv";
  export_curves({curve}, csv);
  std::string agg = slurp(aggregate_path(csv));
  agg += "AllC,1,5,0\n";
  std::ofstream(aggregate_path(csv)) << agg;
  CHECK_THROWS_AS(load_curves(csv), IoError);
  CHECK_THROWS_AS(load_curves(dir / "missing.csv"), IoError);
}
