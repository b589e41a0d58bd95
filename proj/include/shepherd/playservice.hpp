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

// Four-seat public-goods sessions for human co-players.
//
// A session runs three phases of ten rounds: Uniform first, then the two test
// mechanisms in an order fixed by the seed's parity. A round resolves once all
// seats have a contribution. Seats that miss the deadline are marked dropped
// and get uniform random contributions, flagged in the log. Deadlines are
// checked lazily whenever the session is touched.

#ifndef SHEPHERD_PLAYSERVICE_HPP_
#define SHEPHERD_PLAYSERVICE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "shepherd/evalharness.hpp"
#include "shepherd/games.hpp"

namespace shepherd {

inline constexpr int kSeats = kPggParticipants;
inline constexpr int kRoundsPerPhase = 10;
inline constexpr int kPhases = 3;
inline constexpr double kContributionTimeout = 60.0;  // seconds

// Service errors carry a machine-readable code:
//   not_found, invalid_token, session_full, invalid_contribution,
//   duplicate_submission, wrong_state, bad_mechanism.
class PlayError : public Error {
 public:
  PlayError(std::string code, const std::string& message)
      : Error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Seconds on a monotonic clock.
using PlayClock = std::function<double()>;
PlayClock steady_play_clock();

// "checkpoint:<path>" or a baseline name ("Uniform", "baseline:Uniform", ...).
Mechanism resolve_pgg_mechanism(const std::string& ref);

struct SessionConfig {
  Vec4<double> endowments = PggSpec::human_condition().endowments;
  std::string mechanism_a = "AbsoluteProportional";
  std::string mechanism_b = "RelativeProportional";
  std::uint64_t seed = 0;
  double timeout_seconds = kContributionTimeout;
};

enum class SessionStatus { Lobby, Playing, Finished, Aborted };
std::string_view session_status_name(SessionStatus s);

enum class SeatState { Open, Active, Dropped };

struct RoundRecord {
  int phase = 0;  // 0-based
  std::string mechanism;
  int round = 0;  // 1..10
  Vec4<double> contributions = Vec4<double>::Zero();  // rho_i
  std::array<bool, kSeats> auto_filled{};
  Vec4<double> payouts = Vec4<double>::Zero();
  Vec4<double> returns = Vec4<double>::Zero();
  double pool = 0.0;
  double welfare = 0.0;
};

struct PhaseSummary {
  int phase = 0;
  std::string mechanism;
  int rounds = 0;
  double mean_welfare = 0.0;
};

struct SessionLog {
  std::string session_id;
  SessionStatus status = SessionStatus::Lobby;
  std::vector<RoundRecord> records;
  std::vector<PhaseSummary> phases;
};

struct JoinResult {
  std::string token;
  int seat = 0;
  bool rejoined = false;
};

struct SubmitResult {
  bool resolved = false;  // this submission completed the round
  std::optional<RoundRecord> outcome;
};

nlohmann::json round_record_json(const RoundRecord& r);
// One JSON object per line: a "round" record per round, then a "summary".
std::string session_log_jsonl(const SessionLog& log);

class SessionManager {
 public:
  explicit SessionManager(PlayClock clock = steady_play_clock(),
                          std::optional<std::uint64_t> token_seed = std::nullopt);
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  // Resolves both test mechanisms (bad references raise bad_mechanism).
  std::string create_session(const SessionConfig& config);
  // Phases with already-resolved mechanisms, in play order after Uniform.
  std::string create_session(const SessionConfig& config, Mechanism a, Mechanism b);

  // A known token restores its seat instead of taking a new one.
  JoinResult join(const std::string& session_id, const std::string& display_name,
                  const std::optional<std::string>& token = std::nullopt);
  SubmitResult submit_contribution(const std::string& session_id, const std::string& token,
                                   double rho);
  // Seat-scoped view; never contains other seats' pending contributions.
  nlohmann::json get_state(const std::string& session_id, const std::string& token);
  void abort(const std::string& session_id);

  // Requires a finished or aborted session.
  SessionLog export_log(const std::string& session_id);
  void write_log(const std::string& session_id, const std::filesystem::path& path);

  // Mechanism labels in play order.
  std::vector<std::string> schedule(const std::string& session_id);
  SessionStatus status(const std::string& session_id);

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& session_id);
  void process_deadline(Session& s);
  std::optional<RoundRecord> maybe_resolve(Session& s);

  PlayClock clock_;
  std::mutex token_mutex_;
  std::mt19937_64 token_rng_;
  std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_index_ = 0;
};

}  // namespace shepherd

#endif  // SHEPHERD_PLAYSERVICE_HPP_
