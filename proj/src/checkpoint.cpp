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

#include "shepherd/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace shepherd {
namespace {

using Json = nlohmann::ordered_json;

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x, 16);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.size() != 16)
    throw IoError("checkpoint: malformed history digest '" + s + "'");
  return x;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <class Matrix>
Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Field access with IoError instead of nlohmann's exceptions.
const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw IoError(std::string("checkpoint: missing field '") + key + "'");
  return j.at(key);
}

double number(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number()) throw IoError(std::string("checkpoint: field '") + key + "' is not a number");
  return v.get<double>();
}

std::int64_t integer(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number_integer())
    throw IoError(std::string("checkpoint: field '") + key + "' is not an integer");
  return v.get<std::int64_t>();
}

std::string text(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_string()) throw IoError(std::string("checkpoint: field '") + key + "' is not a string");
  return v.get<std::string>();
}

bool boolean(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_boolean())
    throw IoError(std::string("checkpoint: field '") + key + "' is not a boolean");
  return v.get<bool>();
}

Eigen::VectorXd read_vector(const Json& j, const char* key, Eigen::Index size) {
  const Json& v = field(j, key);
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != size)
    throw IoError(std::string("checkpoint: field '") + key + "' must be an array of " +
                  std::to_string(size) + " numbers");
  Eigen::VectorXd out(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    if (!v[i].is_number()) throw IoError(std::string("checkpoint: non-number in '") + key + "'");
    out[i] = v[i].get<double>();
  }
  return out;
}

template <class Matrix>
void read_matrix(const Json& j, const char* key, Matrix& m) {
  const Json& v = field(j, key);
  const std::string what = std::string("checkpoint: field '") + key + "' must be a " +
                           std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " array";
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != m.rows()) throw IoError(what);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Json& row = v[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m.cols()) throw IoError(what);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!row[c].is_number()) throw IoError(what);
      m(r, c) = row[c].get<double>();
    }
  }
}

Json environment_json(const Environment& env) {
  Json j;
  if (const auto* m = std::get_if<MatrixGameEnv>(&env)) {
    const GameSpec& g = m->mdp.game;
    j["kind"] = "matrix-game";
    j["game"] = {{"rR", g.reward}, {"rS", g.sucker}, {"rT", g.temptation}, {"rP", g.punishment},
                 {"name", g.name.empty() ? game_name(g) : g.name}};
    j["discount"] = m->mdp.discount;
    return j;
  }
  const auto& p = std::get<PggEnv>(env);
  j["kind"] = "pgg";
  j["endowments"] = vector_json(p.eval_spec.endowments);
  j["growth"] = p.eval_spec.growth;
  j["propensity"] = std::string(propensity_name(p.eval_spec.propensity));
  j["endowment_min"] = p.endowment_min;
  j["endowment_max"] = p.endowment_max;
  j["resample_endowments"] = p.resample_endowments;
  return j;
}

Environment environment_from_json(const Json& j) {
  const std::string kind = text(j, "kind");
  if (kind == "matrix-game") {
    const Json& gj = field(j, "game");
    GameSpec g{static_cast<int>(integer(gj, "rR")), static_cast<int>(integer(gj, "rS")),
               static_cast<int>(integer(gj, "rT")), static_cast<int>(integer(gj, "rP")), ""};
    g.name = gj.contains("name") ? text(gj, "name") : game_name(g);
    MatrixGameMDP mdp{g, number(j, "discount")};
    try {
      mdp.validate();
    } catch (const ConfigError& e) {
      throw IoError(std::string("checkpoint: ") + e.what());
    }
    return MatrixGameEnv{mdp};
  }
  if (kind == "pgg") {
    PggEnv p;
    p.eval_spec.endowments = Vec4<double>(read_vector(j, "endowments", kPggParticipants));
    p.eval_spec.growth = number(j, "growth");
    const auto prop = propensity_from_name(text(j, "propensity"));
    if (!prop) throw IoError("checkpoint: unknown propensity '" + text(j, "propensity") + "'");
    p.eval_spec.propensity = *prop;
    p.endowment_min = number(j, "endowment_min");
    p.endowment_max = number(j, "endowment_max");
    p.resample_endowments = boolean(j, "resample_endowments");
    try {
      p.eval_spec.validate();
    } catch (const ConfigError& e) {
      throw IoError(std::string("checkpoint: ") + e.what());
    }
    return p;
  }
  throw IoError("checkpoint: unknown environment kind '" + kind + "'");
}

Json policy_json(const Environment& env, const Eigen::VectorXd& theta) {
  Json j;
  if (std::holds_alternative<MatrixGameEnv>(env)) {
    j["kind"] = "one-memory";
    j["logits"] = vector_json(theta);
    return j;
  }
  const MechanismNet net = MechanismNet::from_flat(theta);
  j["kind"] = "mechanism-net";
  j["w1"] = matrix_json(net.w1);
  j["b1"] = vector_json(net.b1);
  j["w2"] = matrix_json(net.w2);
  j["b2"] = vector_json(net.b2);
  return j;
}

Eigen::VectorXd policy_from_json(const Environment& env, const Json& j) {
  const std::string kind = text(j, "kind");
  if (std::holds_alternative<MatrixGameEnv>(env)) {
    if (kind != "one-memory")
      throw IoError("checkpoint: matrix-game checkpoint holds a '" + kind + "' policy");
    return read_vector(j, "logits", kNumGameStates);
  }
  if (kind != "mechanism-net")
    throw IoError("checkpoint: public-goods checkpoint holds a '" + kind + "' policy");
  MechanismNet net = MechanismNet::zeros();
  read_matrix(j, "w1", net.w1);
  net.b1 = read_vector(j, "b1", kMechanismHidden);
  read_matrix(j, "w2", net.w2);
  net.b2 = read_vector(j, "b2", kPggParticipants);
  return net.flatten();
}

Json config_json(const TrainConfig& c) {
  Json j;
  j["outer_steps"] = c.outer_steps;
  j["inner_steps"] = c.inner_steps;
  j["lr_mechanism"] = c.lr_mechanism;
  j["lr_participant"] = c.lr_participant;
  j["es_batch"] = c.es_batch;
  j["es_sigma"] = c.es_sigma;
  j["participant_init_std"] = c.participant_init_std;
  j["es_antithetic"] = c.es_antithetic;
  j["es_rank_shaping"] = c.es_rank_shaping;
  j["grad_clip"] = c.grad_clip;
  return j;
}

TrainConfig config_from_json(const Json& j) {
  TrainConfig c;
  c.outer_steps = static_cast<int>(integer(j, "outer_steps"));
  c.inner_steps = static_cast<int>(integer(j, "inner_steps"));
  c.lr_mechanism = number(j, "lr_mechanism");
  c.lr_participant = number(j, "lr_participant");
  c.es_batch = static_cast<int>(integer(j, "es_batch"));
  c.es_sigma = number(j, "es_sigma");
  c.participant_init_std = number(j, "participant_init_std");
  c.es_antithetic = boolean(j, "es_antithetic");
  c.es_rank_shaping = boolean(j, "es_rank_shaping");
  c.grad_clip = number(j, "grad_clip");
  return c;
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::uint64_t history_digest(const std::vector<double>& history) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : history) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

Checkpoint make_checkpoint(const Environment& env, Method method, const TrainConfig& config,
                           const TrainResult& result) {
  Checkpoint c;
  c.env = env;
  c.method = method;
  c.theta_m = result.theta_m;
  c.config = config;
  c.history_digest = history_digest(result.history);
  c.history_length = static_cast<std::int64_t>(result.history.size());
  return c;
}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  if (ckpt.theta_m.size() != mechanism_param_count(ckpt.env))
    throw ConfigError("checkpoint: parameter count does not match the environment");
  Json j;
  j["format"] = std::string(kCheckpointFormat);
  j["version"] = kCheckpointVersion;
  j["environment"] = environment_json(ckpt.env);
  j["method"] = std::string(method_name(ckpt.method));
  j["policy"] = policy_json(ckpt.env, ckpt.theta_m);
  j["config"] = config_json(ckpt.config);
  j["seed"] = ckpt.config.seed;
  j["history"] = {{"length", ckpt.history_length}, {"digest", hex64(ckpt.history_digest)}};
  return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_string(std::string_view text_in) {
  Json j;
  try {
    j = Json::parse(text_in.begin(), text_in.end());
  } catch (const Json::parse_error& e) {
    throw IoError("checkpoint: parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!j.is_object() || text(j, "format") != kCheckpointFormat)
    throw IoError("checkpoint: not a shepherd checkpoint");
  const std::int64_t version = integer(j, "version");
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");

  Checkpoint c;
  c.env = environment_from_json(field(j, "environment"));
  const auto method = method_from_name(text(j, "method"));
  if (!method) throw IoError("checkpoint: unknown method '" + text(j, "method") + "'");
  c.method = *method;
  c.theta_m = policy_from_json(c.env, field(j, "policy"));
  c.config = config_from_json(field(j, "config"));
  const Json& seed = field(j, "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
    throw IoError("checkpoint: seed must be a nonnegative integer");
  c.config.seed = seed.get<std::uint64_t>();
  const Json& hist = field(j, "history");
  c.history_length = integer(hist, "length");
  c.history_digest = parse_hex64(text(hist, "digest"));
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string body = checkpoint_to_string(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << body;
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return checkpoint_from_string(buf.str());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Mechanism checkpoint_mechanism(const Checkpoint& ckpt, std::string label) {
  return trained_mechanism(ckpt.env, ckpt.theta_m, std::move(label));
}

void write_history_csv(const std::vector<double>& history, int inner_steps,
                       const std::filesystem::path& path) {
  if (inner_steps < 1) throw ConfigError("history CSV needs inner_steps >= 1");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "outer_step,mean_inner_return\n";
  for (std::size_t t = 0; t < history.size(); ++t)
    out << t << ',' << format_double(history[t] / inner_steps) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Environment parse_environment(std::string_view descriptor) {
  if (descriptor == "pgg") return PggEnv{};
  constexpr std::string_view prefix = "game:";
  if (descriptor.substr(0, prefix.size()) == prefix) {
    const std::string_view name = descriptor.substr(prefix.size());
    if (const auto g = find_game(name)) return MatrixGameEnv{MatrixGameMDP{*g}};
    std::string valid;
    for (const auto& g : enumerate_games()) valid += (valid.empty() ? "" : ", ") + g.name;
    throw ConfigError("unknown game '" + std::string(name) + "'; valid names: " + valid);
  }
  throw ConfigError("environment must be 'game:<name>' or 'pgg', got '" +
                    std::string(descriptor) + "'");
}

}  // namespace shepherd
