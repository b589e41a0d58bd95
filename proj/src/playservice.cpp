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

#include "shepherd/playservice.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "shepherd/checkpoint.hpp"

namespace shepherd {
namespace {

using Json = nlohmann::json;

constexpr const char* kTutorial =
    "Each round you receive an endowment and choose what fraction of it to put into a "
    "shared pool. The pool grows by 1.6 and is paid back to the four players by the "
    "round's redistribution rule. Your return for the round is your payout plus whatever "
    "you kept. There are three games of ten rounds; your bonus is proportional to your "
    "total return. Rounds resolve when all four players have chosen; players who do not "
    "choose within the time limit are given a random contribution.";

std::string hex(std::uint64_t x, int digits) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%0*llx", digits, static_cast<unsigned long long>(x));
  return buf;
}

Json vec_json(const Vec4<double>& v) { return Json{v[0], v[1], v[2], v[3]}; }

std::string_view seat_state_name(SeatState s) {
  switch (s) {
    case SeatState::Open:
      return "open";
    case SeatState::Active:
      return "active";
    case SeatState::Dropped:
      return "dropped";
  }
  return "open";
}

}  // namespace

PlayClock steady_play_clock() {
  return [] {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
  };
}

std::string_view session_status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::Lobby:
      return "lobby";
    case SessionStatus::Playing:
      return "playing";
    case SessionStatus::Finished:
      return "finished";
    case SessionStatus::Aborted:
      return "aborted";
  }
  return "lobby";
}

Mechanism resolve_pgg_mechanism(const std::string& ref) {
  constexpr std::string_view ckpt_prefix = "checkpoint:";
  constexpr std::string_view baseline_prefix = "baseline:";
  if (ref.rfind(ckpt_prefix, 0) == 0) {
    const std::string path = ref.substr(ckpt_prefix.size());
    Checkpoint c;
    try {
      c = load_checkpoint(path);
    } catch (const Error& e) {
      throw PlayError("bad_mechanism", e.what());
    }
    if (!std::holds_alternative<PggEnv>(c.env))
      throw PlayError("bad_mechanism", path + " is not a public-goods checkpoint");
    return checkpoint_mechanism(c);
  }
  std::string name = ref;
  if (name.rfind(baseline_prefix, 0) == 0) name = name.substr(baseline_prefix.size());
  if (const auto kind = redistribution_from_name(name)) return Mechanism::baseline(*kind);
  throw PlayError("bad_mechanism", "unknown mechanism '" + ref +
                                       "'; use a baseline name or checkpoint:<path>");
}

Json round_record_json(const RoundRecord& r) {
  Json j;
  j["phase"] = r.phase;
  j["mechanism"] = r.mechanism;
  j["round"] = r.round;
  j["contributions"] = vec_json(r.contributions);
  j["auto_filled"] = Json::array();
  for (bool b : r.auto_filled) j["auto_filled"].push_back(b);
  j["payouts"] = vec_json(r.payouts);
  j["returns"] = vec_json(r.returns);
  j["pool"] = r.pool;
  j["welfare"] = r.welfare;
  return j;
}

std::string session_log_jsonl(const SessionLog& log) {
  std::string out;
  for (const auto& r : log.records) {
    Json j = round_record_json(r);
    j["type"] = "round";
    j["session"] = log.session_id;
    out += j.dump() + "\n";
  }
  Json s;
  s["type"] = "summary";
  s["session"] = log.session_id;
  s["status"] = std::string(session_status_name(log.status));
  s["partial"] = log.status != SessionStatus::Finished;
  s["rounds"] = log.records.size();
  s["phases"] = Json::array();
  for (const auto& p : log.phases)
    s["phases"].push_back(
        {{"phase", p.phase}, {"mechanism", p.mechanism}, {"rounds", p.rounds},
         {"mean_welfare", p.mean_welfare}});
  out += s.dump() + "\n";
  return out;
}

struct SessionManager::Session {
  std::mutex mutex;
  std::string id;
  SessionConfig config;
  PggSpec spec;
  std::vector<Mechanism> phases;
  SessionStatus status = SessionStatus::Lobby;
  std::array<SeatState, kSeats> seats{};
  std::array<std::string, kSeats> tokens;
  std::array<std::string, kSeats> names;
  int phase = 0;
  int round = 1;
  std::array<std::optional<double>, kSeats> pending;
  std::array<bool, kSeats> pending_auto{};
  double round_started = 0.0;
  std::vector<RoundRecord> history;
  Rng fill_rng;
  std::vector<Rng> mechanism_rngs;

  int seat_of(const std::string& token) const {
    for (int i = 0; i < kSeats; ++i)
      if (!token.empty() && tokens[i] == token) return i;
    return -1;
  }
};

SessionManager::SessionManager(PlayClock clock, std::optional<std::uint64_t> token_seed)
    : clock_(std::move(clock)),
      token_rng_(token_seed ? *token_seed : std::random_device{}()) {
  if (!clock_) clock_ = steady_play_clock();
}

SessionManager::~SessionManager() = default;

std::string SessionManager::create_session(const SessionConfig& config) {
  return create_session(config, resolve_pgg_mechanism(config.mechanism_a),
                        resolve_pgg_mechanism(config.mechanism_b));
}

std::string SessionManager::create_session(const SessionConfig& config, Mechanism a,
                                           Mechanism b) {
  PggSpec spec;
  spec.endowments = config.endowments;
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw PlayError("bad_mechanism", e.what());
  }
  if (!(config.timeout_seconds > 0.0))
    throw PlayError("bad_mechanism", "contribution timeout must be positive");
  for (const Mechanism* m : {&a, &b})
    if (!is_compatible(PggEnv{}, *m))
      throw PlayError("bad_mechanism", "'" + m->label + "' is not a public-goods mechanism");

  auto s = std::make_shared<Session>();
  s->config = config;
  s->spec = spec;
  // Counterbalancing: odd seeds play the test mechanisms in reverse order.
  if (config.seed % 2 == 1) std::swap(a, b);
  s->phases = {Mechanism::baseline(Redistribution::Uniform), std::move(a), std::move(b)};
  s->fill_rng = make_rng(config.seed, kPhases);
  for (int p = 0; p < kPhases; ++p) s->mechanism_rngs.push_back(make_rng(config.seed, p));

  std::unique_lock lock(sessions_mutex_);
  const std::uint64_t index = next_index_++;
  s->id = "s" + std::to_string(index) + "-" + hex(derive_seed(config.seed, index), 8);
  sessions_[s->id] = s;
  return s->id;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& session_id) {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw PlayError("not_found", "no session '" + session_id + "'");
  return it->second;
}

std::optional<RoundRecord> SessionManager::maybe_resolve(Session& s) {
  for (const auto& p : s.pending)
    if (!p) return std::nullopt;

  RoundRecord r;
  r.phase = s.phase;
  r.mechanism = s.phases[s.phase].label;
  r.round = s.round;
  for (int i = 0; i < kSeats; ++i) {
    r.contributions[i] = *s.pending[i];
    r.auto_filled[i] = s.pending_auto[i];
  }
  r.payouts = pgg_mechanism_payouts(s.phases[s.phase], s.spec, r.contributions,
                                    s.mechanism_rngs[s.phase]);
  const PggOutcome<double> o = pgg_round(s.spec, r.contributions, r.payouts);
  r.returns = o.participant_returns;
  r.pool = pgg_pool(s.spec, r.contributions);
  r.welfare = o.mechanism_return;
  s.history.push_back(r);

  s.pending.fill(std::nullopt);
  s.pending_auto.fill(false);
  if (++s.round > kRoundsPerPhase) {
    s.round = 1;
    if (++s.phase == kPhases) s.status = SessionStatus::Finished;
  }
  return r;
}

void SessionManager::process_deadline(Session& s) {
  const double now = clock_();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto fill = [&](int i) {
    s.pending[i] = unit(s.fill_rng);
    s.pending_auto[i] = true;
  };
  while (s.status == SessionStatus::Playing) {
    for (int i = 0; i < kSeats; ++i)
      if (s.seats[i] == SeatState::Dropped && !s.pending[i]) fill(i);
    if (maybe_resolve(s)) {
      s.round_started = std::max(s.round_started, now);
      continue;
    }
    const double deadline = s.round_started + s.config.timeout_seconds;
    if (now < deadline) break;
    for (int i = 0; i < kSeats; ++i) {
      if (!s.pending[i]) {
        s.seats[i] = SeatState::Dropped;
        fill(i);
      }
    }
    maybe_resolve(s);
    s.round_started = deadline;
  }
}

JoinResult SessionManager::join(const std::string& session_id, const std::string& display_name,
                                const std::optional<std::string>& token) {
  auto sp = find(session_id);
  Session& s = *sp;
  std::lock_guard lock(s.mutex);
  process_deadline(s);
  if (token) {
    const int seat = s.seat_of(*token);
    if (seat < 0) throw PlayError("invalid_token", "unknown seat token");
    if (s.seats[seat] == SeatState::Dropped) s.seats[seat] = SeatState::Active;
    return {*token, seat, true};
  }
  if (s.status != SessionStatus::Lobby)
    throw PlayError(s.status == SessionStatus::Playing ? "session_full" : "wrong_state",
                    "session " + session_id + " is not accepting new players");
  int seat = -1;
  for (int i = 0; i < kSeats && seat < 0; ++i)
    if (s.seats[i] == SeatState::Open) seat = i;
  if (seat < 0) throw PlayError("session_full", "all seats are taken");

  std::string tok;
  {
    std::lock_guard tlock(token_mutex_);
    tok = hex(token_rng_(), 16) + hex(token_rng_(), 16);
  }
  s.seats[seat] = SeatState::Active;
  s.tokens[seat] = tok;
  s.names[seat] = display_name;
  bool full = true;
  for (auto st : s.seats) full = full && st != SeatState::Open;
  if (full) {
    s.status = SessionStatus::Playing;
    s.round_started = clock_();
  }
  return {tok, seat, false};
}

SubmitResult SessionManager::submit_contribution(const std::string& session_id,
                                                 const std::string& token, double rho) {
  auto sp = find(session_id);
  Session& s = *sp;
  std::lock_guard lock(s.mutex);
  const int seat = s.seat_of(token);
  if (seat < 0) throw PlayError("invalid_token", "unknown seat token");
  process_deadline(s);
  if (s.status != SessionStatus::Playing)
    throw PlayError("wrong_state", "session is " +
                                       std::string(session_status_name(s.status)) +
                                       ", not collecting contributions");
  if (!std::isfinite(rho) || rho < 0.0 || rho > 1.0)
    throw PlayError("invalid_contribution", "contribution must be a fraction in [0, 1]");
  if (s.pending[seat])
    throw PlayError("duplicate_submission", "already submitted for this round");
  if (s.seats[seat] == SeatState::Dropped) s.seats[seat] = SeatState::Active;
  s.pending[seat] = rho;
  s.pending_auto[seat] = false;
  SubmitResult out;
  out.outcome = maybe_resolve(s);
  out.resolved = out.outcome.has_value();
  if (out.resolved) s.round_started = clock_();
  return out;
}

Json SessionManager::get_state(const std::string& session_id, const std::string& token) {
  auto sp = find(session_id);
  Session& s = *sp;
  std::lock_guard lock(s.mutex);
  const int seat = s.seat_of(token);
  if (seat < 0) throw PlayError("invalid_token", "unknown seat token");
  process_deadline(s);

  Json v;
  v["session"] = s.id;
  v["status"] = std::string(session_status_name(s.status));
  v["seat"] = seat;
  v["display_name"] = s.names[seat];
  v["seat_state"] = std::string(seat_state_name(s.seats[seat]));
  v["endowment"] = s.spec.endowments[seat];
  v["endowments"] = vec_json(s.spec.endowments);
  v["phase_count"] = kPhases;
  v["rounds_per_phase"] = kRoundsPerPhase;
  int joined = 0;
  for (auto st : s.seats) joined += st != SeatState::Open;
  v["seats_joined"] = joined;
  if (s.status == SessionStatus::Playing) {
    v["phase"] = s.phase + 1;
    v["round"] = s.round;
    v["submitted"] = s.pending[seat].has_value();
    v["own_contribution"] = s.pending[seat] ? Json(*s.pending[seat]) : Json(nullptr);
    int waiting = 0;
    for (const auto& p : s.pending) waiting += !p;
    v["waiting_for"] = waiting;
    v["seconds_remaining"] =
        std::max(0.0, s.round_started + s.config.timeout_seconds - clock_());
  }
  if (s.status == SessionStatus::Lobby || (s.phase == 0 && s.round == 1))
    v["tutorial"] = kTutorial;

  Json outcomes = Json::array();
  Json own = Json::array();
  double cumulative = 0.0;
  for (const auto& r : s.history) {
    Json o = round_record_json(r);
    o["phase"] = r.phase + 1;
    o.erase("mechanism");  // players are not told which rule is active
    outcomes.push_back(std::move(o));
    own.push_back(r.returns[seat]);
    cumulative += r.returns[seat];
  }
  v["outcomes"] = std::move(outcomes);
  v["own_returns"] = std::move(own);
  v["cumulative_return"] = cumulative;
  return v;
}

void SessionManager::abort(const std::string& session_id) {
  auto sp = find(session_id);
  Session& s = *sp;
  std::lock_guard lock(s.mutex);
  process_deadline(s);
  if (s.status == SessionStatus::Finished || s.status == SessionStatus::Aborted)
    throw PlayError("wrong_state", "session already " +
                                       std::string(session_status_name(s.status)));
  s.status = SessionStatus::Aborted;
  s.pending.fill(std::nullopt);
}

SessionLog SessionManager::export_log(const std::string& session_id) {
  auto sp = find(session_id);
  Session& s = *sp;
  std::lock_guard lock(s.mutex);
  process_deadline(s);
  if (s.status != SessionStatus::Finished && s.status != SessionStatus::Aborted)
    throw PlayError("wrong_state", "log is available once the session finishes or is aborted");
  SessionLog log;
  log.session_id = s.id;
  log.status = s.status;
  log.records = s.history;
  for (int p = 0; p < kPhases; ++p) {
    PhaseSummary sum;
    sum.phase = p;
    sum.mechanism = s.phases[p].label;
    double total = 0.0;
    for (const auto& r : s.history) {
      if (r.phase != p) continue;
      ++sum.rounds;
      total += r.welfare;
    }
    if (sum.rounds == 0) continue;
    sum.mean_welfare = total / sum.rounds;
    log.phases.push_back(sum);
  }
  return log;
}

void SessionManager::write_log(const std::string& session_id, const std::filesystem::path& path) {
  const std::string body = session_log_jsonl(export_log(session_id));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << body;
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::string> SessionManager::schedule(const std::string& session_id) {
  auto sp = find(session_id);
  std::lock_guard lock(sp->mutex);
  std::vector<std::string> out;
  for (const auto& m : sp->phases) out.push_back(m.label);
  return out;
}

SessionStatus SessionManager::status(const std::string& session_id) {
  auto sp = find(session_id);
  std::lock_guard lock(sp->mutex);
  process_deadline(*sp);
  return sp->status;
}

}  // namespace shepherd
