/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <string>
#include <string_view>

namespace apr::detail {

/// "http://host:port/prefix" split into the client base and a path prefix.
struct HttpEndpoint {
  std::string base;    // scheme://host:port
  std::string prefix;  // "" or "/something"

  static HttpEndpoint parse(std::string_view url);
};

/// POSTs a JSON body to `prefix + path`. Retries on transport errors and on
/// non-2xx responses; throws RemoteError with the last status once
/// `retries + 1` attempts have failed.
std::string post_json(const HttpEndpoint& endpoint, std::string_view path, const std::string& body,
                      const std::string& bearer_token, int timeout_ms, int retries);

}  // namespace apr::detail
