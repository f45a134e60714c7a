#include "semcomp/http.hpp"

#include <thread>

#include <httplib.h>

namespace semcomp {

JsonClient::JsonClient(std::string base_url, double timeout_seconds, std::string bearer_token)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds), bearer_token_(std::move(bearer_token)) {
  if (!(timeout_seconds_ > 0)) throw Error("http: timeout must be positive");
  std::string url = base_url_;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("http: base URL needs a scheme: " + base_url_);
  const auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
}

nlohmann::json JsonClient::post(std::string_view path, const nlohmann::json& body) const {
  httplib::Client client(origin_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_seconds_));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!bearer_token_.empty()) headers.emplace("Authorization", "Bearer " + bearer_token_);

  const std::string target = path_prefix_ + std::string(path);
  auto res = client.Post(target, headers, body.dump(), "application/json");
  if (!res) throw HttpError("POST " + origin_ + target + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw HttpError("POST " + origin_ + target + " returned HTTP " + std::to_string(res->status), res->status);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw HttpError("POST " + origin_ + target + " returned invalid JSON: " + e.what(), res->status);
  }
}

nlohmann::json JsonClient::post(std::string_view path, const nlohmann::json& body, const RetryPolicy& retry) const {
  auto delay = retry.base_delay;
  for (int attempt = 0;; ++attempt) {
    try {
      return post(path, body);
    } catch (const HttpError& e) {
      if (!e.retryable() || attempt >= retry.max_retries) throw;
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

}  // namespace semcomp
