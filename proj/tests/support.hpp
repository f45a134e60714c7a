#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "semcomp/types.hpp"

namespace testsupport {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("semcomp-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Local HTTP server that records every POST body and answers via `handler`.
class MockServer {
 public:
  using Handler = std::function<void(const std::string& path, const nlohmann::json& body, httplib::Response& res)>;

  explicit MockServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (...) {
        body = nullptr;
      }
      {
        std::lock_guard lock(mutex_);
        paths_.push_back(req.path);
        raw_.push_back(req.body);
        bodies_.push_back(body);
        auth_.push_back(req.get_header_value("Authorization"));
      }
      handler_(req.path, body, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url(const std::string& prefix = "/v1") const {
    return "http://127.0.0.1:" + std::to_string(port_) + prefix;
  }
  std::vector<nlohmann::json> bodies() const {
    std::lock_guard lock(mutex_);
    return bodies_;
  }
  std::vector<std::string> raw_bodies() const {
    std::lock_guard lock(mutex_);
    return raw_;
  }
  std::vector<std::string> paths() const {
    std::lock_guard lock(mutex_);
    return paths_;
  }
  std::vector<std::string> auth_headers() const {
    std::lock_guard lock(mutex_);
    return auth_;
  }
  std::size_t count() const {
    std::lock_guard lock(mutex_);
    return bodies_.size();
  }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  std::vector<std::string> paths_;
  std::vector<std::string> raw_;
  std::vector<nlohmann::json> bodies_;
  std::vector<std::string> auth_;
};

inline semcomp::RowMatrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  semcomp::RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

inline semcomp::BinaryFeatureMatrix random_bits(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double p) {
  std::bernoulli_distribution bit(p);
  semcomp::BinaryFeatureMatrix b(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) b.set(i, j, bit(rng));
  return b;
}

/// Sample covariance with the n-1 denominator, accumulated element by element.
inline semcomp::Matrix brute_covariance(const semcomp::RowMatrix& z) {
  const auto n = z.rows();
  const auto d = z.cols();
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) mean[static_cast<std::size_t>(j)] += z(i, j);
    mean[static_cast<std::size_t>(j)] /= static_cast<double>(n);
  }
  semcomp::Matrix cov(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        s += (z(i, a) - mean[static_cast<std::size_t>(a)]) * (z(i, b) - mean[static_cast<std::size_t>(b)]);
      cov(a, b) = s / static_cast<double>(n - 1);
    }
  }
  return cov;
}

/// Pearson correlation of two equal-length sequences.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline std::vector<double> column(const semcomp::RowMatrix& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, c);
  return out;
}

/// Exhaustive best total overlap between recovered columns and truth columns,
/// by dynamic programming over subsets of truth columns (truth side <= 16).
inline std::size_t exhaustive_best_overlap(const std::vector<std::vector<std::size_t>>& overlap) {
  const std::size_t rec = overlap.size();
  const std::size_t tru = rec ? overlap[0].size() : 0;
  std::vector<long long> best(std::size_t{1} << tru, -1);
  best[0] = 0;
  for (std::size_t r = 0; r < rec; ++r) {
    auto next = best;  // row r left unmatched
    for (std::size_t mask = 0; mask < best.size(); ++mask) {
      if (best[mask] < 0) continue;
      for (std::size_t f = 0; f < tru; ++f) {
        if (mask & (std::size_t{1} << f)) continue;
        const auto m2 = mask | (std::size_t{1} << f);
        next[m2] = std::max(next[m2], best[mask] + static_cast<long long>(overlap[r][f]));
      }
    }
    best = std::move(next);
  }
  long long out = 0;
  for (auto v : best) out = std::max(out, v);
  return static_cast<std::size_t>(out);
}

}  // namespace testsupport
