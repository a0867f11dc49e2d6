/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "http_endpoint.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

#include "apr/error.hpp"

namespace apr::detail {

HttpEndpoint HttpEndpoint::parse(std::string_view url) {
  if (url.empty()) throw Error(ErrorCode::kConfig, "remote endpoint URL is empty");
  HttpEndpoint ep;
  const auto scheme = url.find("://");
  const std::size_t host_start = scheme == std::string_view::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  if (slash == std::string_view::npos) {
    ep.base = std::string(url);
  } else {
    ep.base = std::string(url.substr(0, slash));
    ep.prefix = std::string(url.substr(slash));
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  }
  if (scheme == std::string_view::npos) ep.base = "http://" + ep.base;
  return ep;
}

std::string post_json(const HttpEndpoint& endpoint, std::string_view path, const std::string& body,
                      const std::string& bearer_token, int timeout_ms, int retries) {
  httplib::Client client(endpoint.base);
  const auto timeout = std::chrono::milliseconds(std::max(1, timeout_ms));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

  const std::string target = endpoint.prefix + std::string(path);
  int last_status = 0;
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
    auto res = client.Post(target, headers, body, "application/json");
    if (!res) {
      last_status = 0;
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    last_status = res->status;
    if (res->status >= 200 && res->status < 300) return res->body;
    last_error = "POST " + target + " failed";
  }
  throw RemoteError(last_status, last_error + " after " + std::to_string(retries + 1) + " attempt(s)");
}

}  // namespace apr::detail
