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

// Checkpoints: trained mechanisms plus everything needed to reproduce them,
// stored as JSON text. Doubles are written at shortest round-trip precision,
// so save -> load -> save is byte-identical.

#ifndef SHEPHERD_CHECKPOINT_HPP_
#define SHEPHERD_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "shepherd/evalharness.hpp"
#include "shepherd/training.hpp"

namespace shepherd {

inline constexpr int kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointFormat = "shepherd-checkpoint";

struct Checkpoint {
  Environment env;
  Method method = Method::DiffMD;
  Eigen::VectorXd theta_m;
  TrainConfig config;
  std::uint64_t history_digest = 0;
  std::int64_t history_length = 0;
};

Checkpoint make_checkpoint(const Environment& env, Method method, const TrainConfig& config,
                           const TrainResult& result);

// FNV-1a over the little-endian bit patterns of the values.
std::uint64_t history_digest(const std::vector<double>& history);

std::string checkpoint_to_string(const Checkpoint& ckpt);
// Throws IoError on malformed text (with the byte offset for syntax errors),
// unknown format or version mismatch.
Checkpoint checkpoint_from_string(std::string_view text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// The trained mechanism a checkpoint holds, labelled `label`.
Mechanism checkpoint_mechanism(const Checkpoint& ckpt, std::string label = "IO-Loop");

// outer_step,mean_inner_return with Rbar_m / T_p per row.
void write_history_csv(const std::vector<double>& history, int inner_steps,
                       const std::filesystem::path& path);

// "game:<name>" or "pgg". Unknown game names throw ConfigError listing the
// valid ones.
Environment parse_environment(std::string_view descriptor);

// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

}  // namespace shepherd

#endif  // SHEPHERD_CHECKPOINT_HPP_
