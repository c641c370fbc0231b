#include "culcap/http_transport.hpp"

#include <chrono>

#include "culcap/common.hpp"
#include "httplib.h"

namespace culcap {

Endpoint parse_endpoint(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(ErrorCode::kConfig, "endpoint '" + std::string(url) + "' lacks a scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  if (path_start == std::string_view::npos) {
    ep.origin = std::string(url);
    ep.path = "/";
  } else {
    ep.origin = std::string(url.substr(0, path_start));
    ep.path = std::string(url.substr(path_start));
  }
  if (ep.origin.size() <= scheme_end + 3) {
    throw Error(ErrorCode::kConfig, "endpoint '" + std::string(url) + "' lacks a host");
  }
  return ep;
}

PostFn make_http_post(const std::string& url, int timeout_ms, std::string api_key) {
  Endpoint ep = parse_endpoint(url);
  return [ep, timeout_ms, key = std::move(api_key)](const std::string& body) {
    httplib::Client client(ep.origin);
    const auto timeout = std::chrono::milliseconds(timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    auto res = client.Post(ep.path, headers, body, "application/json");
    if (!res) {
      throw TransportFailure("POST " + ep.origin + ep.path + " failed: " +
                             httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportFailure("POST " + ep.origin + ep.path + " returned HTTP " +
                             std::to_string(res->status));
    }
    return res->body;
  };
}

}  // namespace culcap
