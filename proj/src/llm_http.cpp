// Live chat-completion transport. Only compiled into the CLI path; the tests
// inject recorded transports instead.

// Eigen (via planner.h) must come first: httplib pulls in <resolv.h>, whose
// `_res` macro breaks Eigen's product kernels.
#include "gridagent/error.h"
#include "gridagent/planner.h"

#include <cstdlib>
#include <regex>

#include <fmt/format.h>

#ifdef GRIDAGENT_HTTPS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

namespace gridagent {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(ErrorCode::TransportError, "malformed endpoint URL '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

}  // namespace

ChatTransport make_http_transport(const LlmClientConfig& cfg) {
  cfg.validate();
  if (cfg.endpoint.empty()) throw Error(ErrorCode::TransportError, "no LLM endpoint (set GRID_AGENT_LLM_ENDPOINT)");
  const Endpoint ep = split_url(cfg.endpoint);
#ifndef GRIDAGENT_HTTPS
  if (ep.origin.rfind("https://", 0) == 0) {
    throw Error(ErrorCode::TransportError, "built without TLS support; https endpoints unavailable");
  }
#endif
  const std::string key_env = cfg.api_key_env;

  return [ep, key_env](const ChatRequest& req) -> std::string {
    httplib::Client client(ep.origin);
    const auto secs = static_cast<time_t>(req.timeout_seconds);
    const auto usecs = static_cast<time_t>((req.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (const char* key = std::getenv(key_env.c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string body = chat_request_body(req).dump();
    auto res = client.Post(ep.path, headers, body, "application/json");
    if (!res) throw Error(ErrorCode::TransportError, "request failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::TransportError, fmt::format("HTTP {} from endpoint", res->status));
    }
    return chat_response_text(res->body);
  };
}

}  // namespace gridagent
