// Copyright 2026 The dcekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Chat-completions HTTP client used as the synthesis backend: standard
// messages-array request shape, bearer credentials from an environment
// variable, retries with jittered exponential backoff on transport errors
// and retryable statuses.

#pragma once

#include <chrono>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dce/core.hpp"
#include "dce/synthesis.hpp"

namespace dce {

namespace detail {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos)
    throw Error("backend endpoint must include a scheme: " + url);
  const std::size_t path_start = url.find('/', scheme + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

}  // namespace detail

// Builds a ChatBackend bound to cfg.backend_endpoint. The role tag picks the
// per-role model and temperature.
inline ChatBackend make_http_chat_backend(const SynthesisConfig& cfg) {
  const detail::SplitUrl url = detail::split_url(cfg.backend_endpoint);
  std::string api_key;
  if (!cfg.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg.api_key_env.c_str())) api_key = key;
  }

  return [cfg, url, api_key](const ChatRequest& request) -> std::string {
    nlohmann::json body;
    body["model"] =
        request.role == "reviewer" ? cfg.reviewer_model : cfg.analyst_model;
    body["messages"] = nlohmann::json::array();
    if (!request.system.empty())
      body["messages"].push_back({{"role", "system"}, {"content", request.system}});
    body["messages"].push_back({{"role", "user"}, {"content", request.user}});
    const auto temperature = request.role == "reviewer" ? cfg.reviewer_temperature
                                                        : cfg.analyst_temperature;
    if (temperature) body["temperature"] = *temperature;
    const std::string payload = body.dump();

    std::mt19937 jitter_rng(std::random_device{}());
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    std::string last_error = "no attempt made";

    for (int attempt = 0; attempt <= cfg.retry_limit; ++attempt) {
      if (attempt > 0) {
        const double delay_s = cfg.backoff_base_s *
                               std::pow(2.0, static_cast<double>(attempt - 1)) *
                               jitter(jitter_rng);
        std::this_thread::sleep_for(std::chrono::duration<double>(delay_s));
      }

      httplib::Client client(url.base);
      client.set_connection_timeout(std::chrono::duration<double>(cfg.request_timeout_s));
      client.set_read_timeout(std::chrono::duration<double>(cfg.request_timeout_s));
      httplib::Headers headers;
      if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

      const auto res = client.Post(url.path, headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
        if (detail::retryable_status(res->status)) continue;
        break;  // non-retryable client error
      }
      const nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
      if (reply.is_discarded()) {
        last_error = "backend returned non-JSON body";
        continue;
      }
      try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        last_error = std::string("unexpected completion shape: ") + e.what();
        continue;
      }
    }
    throw BackendError("chat backend failed after " +
                       std::to_string(cfg.retry_limit + 1) + " attempts; last: " +
                       last_error);
  };
}

}  // namespace dce
