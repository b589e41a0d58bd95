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

#include <json.hpp>

#include "shepherd/checkpoint.hpp"

using namespace shepherd;
namespace fs = std::filesystem;

namespace {

Checkpoint small_matrix_checkpoint() {
  const Environment env = parse_environment("game:StagHunt");
  TrainConfig c;
  c.outer_steps = 5;
  c.inner_steps = 4;
  c.seed = 11;
  return make_checkpoint(env, Method::DiffMD, c, run_inner_outer(env, Method::DiffMD, c));
}

Checkpoint small_pgg_checkpoint() {
  const Environment env = parse_environment("pgg");
  TrainConfig c = TrainConfig::pgg_defaults();
  c.outer_steps = 2;
  c.seed = 3;
  return make_checkpoint(env, Method::DiffMD, c, run_inner_outer(env, Method::DiffMD, c));
}

std::string with_field(const std::string& text, const std::string& key, const nlohmann::json& v) {
  auto j = nlohmann::ordered_json::parse(text);
  j[key] = v;
  return j.dump(2);
}

}  // namespace

TEST_CASE("matrix-game checkpoint round-trips byte for byte") {
  const Checkpoint ckpt = small_matrix_checkpoint();
  const std::string text = checkpoint_to_string(ckpt);
  const Checkpoint back = checkpoint_from_string(text);
  CHECK(back.theta_m == ckpt.theta_m);
  CHECK(back.method == ckpt.method);
  CHECK(back.config.seed == 11);
  CHECK(back.history_length == 5);
  CHECK(checkpoint_to_string(back) == text);

  const auto j = nlohmann::json::parse(text);
  CHECK(j["environment"]["kind"] == "matrix-game");
  CHECK(j["environment"]["game"]["name"] == "StagHunt");
  CHECK(j["policy"]["kind"] == "one-memory");
}

TEST_CASE("public-goods checkpoint round-trips through a file") {
  const fs::path path = fs::temp_directory_path() / "shepherd_ckpt_pgg.json";
  const Checkpoint ckpt = small_pgg_checkpoint();
  save_checkpoint(ckpt, path);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.theta_m == ckpt.theta_m);
  CHECK(std::get<PggEnv>(back.env).eval_spec.propensity == Propensity::Direct);
  CHECK(checkpoint_to_string(back) == checkpoint_to_string(ckpt));
  const Mechanism m = checkpoint_mechanism(back);
  CHECK(std::get<MechanismNet>(m.policy).flatten() == ckpt.theta_m);
}

TEST_CASE("version and format mismatches are rejected") {
  const std::string text = checkpoint_to_string(small_matrix_checkpoint());
  CHECK_THROWS_AS(checkpoint_from_string(with_field(text, "version", 2)), IoError);
  CHECK_THROWS_AS(checkpoint_from_string(with_field(text, "format", "other")), IoError);
  CHECK_THROWS_AS(checkpoint_from_string(with_field(text, "method", "sgd")), IoError);
  CHECK_THROWS_AS(checkpoint_from_string(with_field(text, "seed", -1)), IoError);
  try {
    checkpoint_from_string(with_field(text, "version", 9));
    FAIL("accepted version 9");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("version 9") != std::string::npos);
  }
}

TEST_CASE("parse errors report a byte offset") {
  try {
    checkpoint_from_string("{\"format\": \"shepherd-checkpoint\", oops}");
    FAIL("accepted malformed JSON");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("byte 35") != std::string::npos);
  }
}

TEST_CASE("missing or malformed fields are named") {
  const std::string text = checkpoint_to_string(small_matrix_checkpoint());
  auto j = nlohmann::ordered_json::parse(text);
  j.erase("policy");
  try {
    checkpoint_from_string(j.dump());
    FAIL("accepted a checkpoint without a policy");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("'policy'") != std::string::npos);
  }
  j = nlohmann::ordered_json::parse(text);
  j["policy"]["logits"] = {1, 2, 3};
  CHECK_THROWS_AS(checkpoint_from_string(j.dump()), IoError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json"), IoError);
}

TEST_CASE("history digest depends on every bit") {
  const std::vector<double> a = {1.0, 2.0, 3.0};
  std::vector<double> b = a;
  CHECK(history_digest(a) == history_digest(b));
  b[2] = std::nextafter(3.0, 4.0);
  CHECK(history_digest(a) != history_digest(b));
  CHECK(history_digest({}) == 0xcbf29ce484222325ULL);
}

TEST_CASE("history CSV divides by the inner step count") {
  const fs::path path = fs::temp_directory_path() / "shepherd_history.csv";
  write_history_csv({-20.0, 5.0}, 10, path);
  std::ifstream in(path);
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  CHECK(l1 == "outer_step,mean_inner_return");
  CHECK(l2 == "0,-2");
  CHECK(l3 == "1,0.5");
}

TEST_CASE("environment descriptors") {
  CHECK(std::holds_alternative<PggEnv>(parse_environment("pgg")));
  const auto env = parse_environment("game:PrisonersDilemma");
  CHECK(std::get<MatrixGameEnv>(env).mdp.game.name == "PrisonersDilemma");
  try {
    parse_environment("game:Tennis");
    FAIL("accepted an unknown game");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("StagHunt") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_environment("matrix"), ConfigError);
}

TEST_CASE("numbers are written in shortest round-trip form") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
