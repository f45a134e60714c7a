#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

#include "semcomp/types.hpp"

namespace semcomp {

/// Transport or protocol failure talking to a remote endpoint.
class HttpError : public Error {
 public:
  HttpError(const std::string& what, int status = 0) : Error(what), status_(status) {}
  int status() const { return status_; }
  /// Connection failures, timeouts, 408, 429 and 5xx are worth retrying.
  bool retryable() const { return status_ == 0 || status_ == 408 || status_ == 429 || status_ >= 500; }

 private:
  int status_;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};  ///< doubled after every failed attempt
};

/// JSON-over-HTTP POST client for one base URL such as "https://api.openai.com/v1".
/// Stateless between calls, so one instance may be shared across threads.
class JsonClient {
 public:
  JsonClient(std::string base_url, double timeout_seconds, std::string bearer_token = {});

  /// POST {base_url}{path}; throws HttpError on transport failure, non-2xx
  /// status or an unparseable body.
  nlohmann::json post(std::string_view path, const nlohmann::json& body) const;

  /// post() with retries on retryable failures.
  nlohmann::json post(std::string_view path, const nlohmann::json& body, const RetryPolicy& retry) const;

  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // "/v1" or ""
  double timeout_seconds_;
  std::string bearer_token_;
};

}  // namespace semcomp
