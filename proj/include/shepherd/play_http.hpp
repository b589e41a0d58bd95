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

// HTTP JSON front end for SessionManager.
//
//   POST /sessions                  {"mechanisms": [a, b], "seed", "endowments", "timeout_seconds"}
//   POST /sessions/{id}/join        {"name", "token"?}
//   GET  /sessions/{id}/state?token=
//   POST /sessions/{id}/contribute  {"token", "rho"}
//   GET  /sessions/{id}/log         JSON lines
//   POST /sessions/{id}/abort
//
// Errors are {"error": {"code", "message"}} with a matching HTTP status.

#ifndef SHEPHERD_PLAY_HTTP_HPP_
#define SHEPHERD_PLAY_HTTP_HPP_

#include <map>
#include <memory>
#include <string>

#include "shepherd/playservice.hpp"

namespace shepherd {

struct ApiRequest {
  std::string method;  // "GET" or "POST"
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

int http_status_for(const std::string& error_code);

// Routes one request. Never throws.
ApiResponse handle_api_request(SessionManager& sessions, const ApiRequest& request);

class PlayServer {
 public:
  explicit PlayServer(SessionManager& sessions);
  ~PlayServer();
  PlayServer(const PlayServer&) = delete;
  PlayServer& operator=(const PlayServer&) = delete;

  // Binds and serves until stop(); port 0 picks a free port.
  int bind(const std::string& host, int port);
  bool serve();  // blocks
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shepherd

#endif  // SHEPHERD_PLAY_HTTP_HPP_
