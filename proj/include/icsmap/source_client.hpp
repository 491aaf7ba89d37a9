#pragma once
// HTTP client for pulling scan exports from a paginated source.
//
// The source serves NDJSON pages at GET <path>?page=N starting from page 1;
// an empty (or whitespace-only) body marks the end. Authentication is an
// optional bearer token. Transient failures — connection errors and 5xx
// responses — are retried with exponential backoff; 401/403 means the
// credentials are bad and aborts immediately.

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>

#include <httplib.h>

#include "icsmap/errors.hpp"

namespace icsmap {

struct FetchConfig {
  std::string base_url;                // e.g. "http://127.0.0.1:8080/export"
  std::optional<std::string> api_key;  // sent as "Authorization: Bearer <key>"
  uint32_t rate_limit_per_sec = 0;     // max request starts per second; 0 = unlimited
  int max_retries = 3;                 // additional attempts per page after a transient failure
  int backoff_initial_ms = 100;        // first retry delay, doubles per retry
};

namespace detail {

struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string path = "/";
};

inline ParsedUrl parse_http_url(std::string_view url) {
  constexpr std::string_view scheme = "http://";
  if (url.substr(0, scheme.size()) != scheme)
    throw std::invalid_argument("unsupported source url (expected http://...): " +
                                std::string(url));
  std::string_view rest = url.substr(scheme.size());
  ParsedUrl out;
  const size_t slash = rest.find('/');
  std::string_view authority = slash == std::string_view::npos ? rest : rest.substr(0, slash);
  if (slash != std::string_view::npos) out.path = std::string(rest.substr(slash));
  const size_t colon = authority.find(':');
  if (colon == std::string_view::npos) {
    out.host = std::string(authority);
  } else {
    out.host = std::string(authority.substr(0, colon));
    const std::string port_text(authority.substr(colon + 1));
    try {
      out.port = std::stoi(port_text);
    } catch (const std::exception&) {
      throw std::invalid_argument("invalid port in source url: " + std::string(url));
    }
    if (out.port < 1 || out.port > 65535)
      throw std::invalid_argument("invalid port in source url: " + std::string(url));
  }
  if (out.host.empty())
    throw std::invalid_argument("missing host in source url: " + std::string(url));
  return out;
}

inline bool whitespace_only(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace detail

// Fetch all pages and return the concatenated NDJSON text. Throws AuthError
// on 401/403, TransportError on connection failure or non-auth HTTP errors
// that survive retrying.
inline std::string fetch_scan(const FetchConfig& config) {
  const detail::ParsedUrl url = detail::parse_http_url(config.base_url);
  httplib::Client client(url.host, url.port);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(10, 0);

  httplib::Headers headers;
  if (config.api_key) headers.emplace("Authorization", "Bearer " + *config.api_key);

  const char separator = url.path.find('?') == std::string::npos ? '?' : '&';
  using clock = std::chrono::steady_clock;
  std::optional<clock::time_point> last_request_start;

  std::string out;
  for (uint64_t page = 1;; ++page) {
    if (config.rate_limit_per_sec > 0 && last_request_start) {
      const auto interval = std::chrono::microseconds(1000000 / config.rate_limit_per_sec);
      const auto next_allowed = *last_request_start + interval;
      const auto now = clock::now();
      if (now < next_allowed) std::this_thread::sleep_for(next_allowed - now);
    }

    const std::string path = url.path + separator + "page=" + std::to_string(page);
    std::string body;
    bool got_body = false;
    for (int attempt = 0;; ++attempt) {
      last_request_start = clock::now();
      httplib::Result res = client.Get(path, headers);
      if (res) {
        const int status = res->status;
        if (status == 401 || status == 403)
          throw AuthError("source rejected credentials (status " + std::to_string(status) + ")");
        if (status >= 200 && status < 300) {
          body = std::move(res->body);
          got_body = true;
          break;
        }
        if (status < 500)
          throw TransportError("source request failed (status " + std::to_string(status) + ")");
      }
      // Connection failure or 5xx: transient, retry with backoff.
      if (attempt >= config.max_retries) {
        const std::string reason =
            res ? "status " + std::to_string(res->status) : "connection failed";
        throw TransportError("source unavailable after " +
                             std::to_string(config.max_retries + 1) + " attempts (" + reason +
                             ")");
      }
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<int64_t>(config.backoff_initial_ms) << attempt));
    }

    if (!got_body || detail::whitespace_only(body)) break;
    out += body;
    if (out.back() != '\n') out += '\n';
  }
  return out;
}

}  // namespace icsmap
