#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace culcap {

// A request that produced no usable HTTP response (connect failure, timeout,
// non-2xx status).
class TransportFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// POSTs a JSON body and returns the response body; throws TransportFailure.
using PostFn = std::function<std::string(const std::string& body)>;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

Endpoint parse_endpoint(std::string_view url);

// `api_key`, when non-empty, is sent as a bearer token.
PostFn make_http_post(const std::string& url, int timeout_ms, std::string api_key);

}  // namespace culcap
