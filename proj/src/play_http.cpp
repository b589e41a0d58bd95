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

#include "shepherd/play_http.hpp"

#include <regex>

#include <httplib.h>

namespace shepherd {
namespace {

using Json = nlohmann::json;

ApiResponse json_response(int status, const Json& body) {
  return {status, "application/json", body.dump()};
}

ApiResponse error_response(const std::string& code, const std::string& message) {
  return json_response(http_status_for(code),
                       Json{{"error", {{"code", code}, {"message", message}}}});
}

Json parse_body(const std::string& body) {
  if (body.empty()) return Json::object();
  Json j = Json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object())
    throw PlayError("bad_request", "request body must be a JSON object");
  return j;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw PlayError("bad_request", std::string("field '") + key + "' has the wrong type");
  }
}

ApiResponse create(SessionManager& sm, const Json& body) {
  SessionConfig c;
  if (body.contains("mechanisms")) {
    const auto m = get_or<std::vector<std::string>>(body, "mechanisms", {});
    if (m.size() != 2)
      throw PlayError("bad_request", "'mechanisms' must name exactly two test mechanisms");
    c.mechanism_a = m[0];
    c.mechanism_b = m[1];
  }
  c.seed = get_or<std::uint64_t>(body, "seed", 0);
  c.timeout_seconds = get_or<double>(body, "timeout_seconds", kContributionTimeout);
  if (body.contains("endowments")) {
    const auto e = get_or<std::vector<double>>(body, "endowments", {});
    if (e.size() != kSeats) throw PlayError("bad_request", "'endowments' needs 4 values");
    c.endowments = Vec4<double>(e[0], e[1], e[2], e[3]);
  }
  const std::string id = sm.create_session(c);
  return json_response(201, Json{{"session", id}, {"schedule", sm.schedule(id)}});
}

ApiResponse route(SessionManager& sm, const ApiRequest& req) {
  if (req.path == "/sessions") {
    if (req.method != "POST") throw PlayError("method_not_allowed", "use POST /sessions");
    return create(sm, parse_body(req.body));
  }
  static const std::regex pattern(R"(^/sessions/([^/]+)/(join|state|contribute|log|abort)$)");
  std::smatch m;
  if (!std::regex_match(req.path, m, pattern))
    throw PlayError("not_found", "no route for " + req.path);
  const std::string id = m[1];
  const std::string action = m[2];
  const bool get = action == "state" || action == "log";
  if (req.method != (get ? "GET" : "POST"))
    throw PlayError("method_not_allowed", "wrong method for " + req.path);

  if (action == "join") {
    const Json body = parse_body(req.body);
    std::optional<std::string> token;
    if (body.contains("token")) token = get_or<std::string>(body, "token", "");
    const JoinResult r = sm.join(id, get_or<std::string>(body, "name", ""), token);
    return json_response(200, Json{{"token", r.token}, {"seat", r.seat}, {"rejoined", r.rejoined}});
  }
  if (action == "state") {
    const auto it = req.query.find("token");
    return json_response(200, sm.get_state(id, it == req.query.end() ? "" : it->second));
  }
  if (action == "contribute") {
    const Json body = parse_body(req.body);
    if (!body.contains("rho") || !body.at("rho").is_number())
      throw PlayError("invalid_contribution", "'rho' must be a number in [0, 1]");
    const SubmitResult r = sm.submit_contribution(id, get_or<std::string>(body, "token", ""),
                                                  body.at("rho").get<double>());
    Json out{{"accepted", true}, {"resolved", r.resolved}};
    if (r.outcome) {
      Json o = round_record_json(*r.outcome);
      o["phase"] = r.outcome->phase + 1;
      o.erase("mechanism");
      out["outcome"] = std::move(o);
    }
    return json_response(200, out);
  }
  if (action == "log") return {200, "application/x-ndjson", session_log_jsonl(sm.export_log(id))};
  sm.abort(id);
  return json_response(200, Json{{"status", "aborted"}});
}

}  // namespace

int http_status_for(const std::string& code) {
  if (code == "not_found") return 404;
  if (code == "invalid_token") return 403;
  if (code == "method_not_allowed") return 405;
  if (code == "session_full" || code == "duplicate_submission" || code == "wrong_state")
    return 409;
  if (code == "internal") return 500;
  return 400;
}

ApiResponse handle_api_request(SessionManager& sessions, const ApiRequest& request) {
  try {
    return route(sessions, request);
  } catch (const PlayError& e) {
    return error_response(e.code(), e.what());
  } catch (const std::exception& e) {
    return error_response("internal", e.what());
  }
}

struct PlayServer::Impl {
  SessionManager& sessions;
  httplib::Server server;
  explicit Impl(SessionManager& s) : sessions(s) {}
};

PlayServer::PlayServer(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest a{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) a.query.emplace(k, v);
    const ApiResponse r = handle_api_request(impl_->sessions, a);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get(R"(/sessions.*)", handler);
  impl_->server.Post(R"(/sessions.*)", handler);
}

PlayServer::~PlayServer() { stop(); }

int PlayServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool PlayServer::serve() { return impl_->server.listen_after_bind(); }

void PlayServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace shepherd
