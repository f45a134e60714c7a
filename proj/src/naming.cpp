#include "semcomp/naming.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "semcomp/http.hpp"
#include "semcomp/log.hpp"
#include "semcomp/matrixio.hpp"

namespace semcomp {

std::string_view to_string(NamingStyle style) { return style == NamingStyle::one_word ? "one_word" : "unconstrained"; }

NamingStyle parse_naming_style(std::string_view name) {
  if (name == "one_word") return NamingStyle::one_word;
  if (name == "unconstrained") return NamingStyle::unconstrained;
  throw Error("unknown naming style: " + std::string(name));
}

void NamingRequest::validate() const {
  if (words.empty()) throw Error("empty naming request");
  if (words.size() > kMaxNamingWords) throw Error("naming request has more than 100 words");
}

void ChatEndpointConfig::validate() const {
  if (!(timeout_seconds > 0)) throw Error("naming: timeout must be positive");
  if (max_retries < 0) throw Error("naming: retries must be non-negative");
  if (concurrency < 1) throw Error("naming: concurrency must be at least 1");
}

std::string naming_user_message(NamingStyle style, const std::vector<std::string>& words) {
  std::string msg(kNamingPrompt);
  if (style == NamingStyle::one_word) {
    msg += ' ';
    msg += kOneWordSentence;
  }
  msg += "\n\n";
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) msg += ", ";
    msg += words[i];
  }
  return msg;
}

nlohmann::ordered_json chat_request_body(const NamingRequest& req, const ChatEndpointConfig& cfg) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  body["temperature"] = cfg.temperature;
  body["messages"] = nlohmann::ordered_json::array({
      {{"role", "system"}, {"content", std::string(kNamingSystemMessage)}},
      {{"role", "user"}, {"content", naming_user_message(req.style, req.words)}},
  });
  return body;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string extract_content(const nlohmann::json& response) {
  const auto& choices = response.at("choices");
  if (!choices.is_array() || choices.empty()) throw Error("response has no choices");
  return choices.at(0).at("message").at("content").get<std::string>();
}

}  // namespace

std::string sanitize_name(std::string_view raw) {
  std::string_view line;
  std::string_view rest = raw;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    line = trim(rest.substr(0, nl));
    if (!line.empty()) break;
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
  }
  auto strip = [](char c) { return c == '"' || c == '\'' || c == '*' || c == '`'; };
  while (!line.empty() && strip(line.front())) line.remove_prefix(1);
  while (!line.empty() && (strip(line.back()) || line.back() == '.')) line.remove_suffix(1);
  line = trim(line);
  if (line.size() > kMaxNameLength) {
    std::size_t cut = kMaxNameLength;
    // Back off continuation bytes (10xxxxxx).
    while (cut > 0 && (static_cast<unsigned char>(line[cut]) & 0xC0) == 0x80) --cut;
    line = trim(line.substr(0, cut));
  }
  return std::string(line);
}

std::string fallback_name(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, words.size()); ++i) {
    if (i) out += '+';
    out += words[i];
  }
  return out;
}

std::string naming_cache_key(const NamingRequest& req, std::string_view model) {
  const nlohmann::json key = {req.words, to_string(req.end), to_string(req.style), model};
  return hex64(fnv1a(key.dump()));
}

struct Namer::State {
  std::optional<std::filesystem::path> cache_path;
  std::optional<std::filesystem::path> audit_path;
  std::shared_mutex cache_mutex;
  std::unordered_map<std::string, std::string> cache;
  std::mutex audit_mutex;
  std::optional<JsonClient> client;
};

Namer::Namer(ChatEndpointConfig cfg, std::optional<std::filesystem::path> cache_path,
             std::optional<std::filesystem::path> audit_path)
    : cfg_(std::move(cfg)), state_(std::make_unique<State>()) {
  cfg_.validate();
  if (cfg_.api_key.empty()) {
    if (const char* key = std::getenv("SEMCOMP_API_KEY")) cfg_.api_key = key;
  }
  state_->cache_path = std::move(cache_path);
  state_->audit_path = std::move(audit_path);
  if (!cfg_.base_url.empty()) state_->client.emplace(cfg_.base_url, cfg_.timeout_seconds, cfg_.api_key);
  if (state_->cache_path && std::filesystem::exists(*state_->cache_path)) {
    std::istringstream lines(read_file(*state_->cache_path));
    std::string line;
    while (std::getline(lines, line)) {
      if (trim(line).empty()) continue;
      const auto entry = nlohmann::json::parse(line);
      state_->cache[entry.at("key").get<std::string>()] = entry.at("name").get<std::string>();
    }
  }
}

Namer::~Namer() = default;

NamingResult Namer::name(const NamingRequest& req) {
  req.validate();
  const std::string key = naming_cache_key(req, cfg_.model);
  {
    std::shared_lock lock(state_->cache_mutex);
    if (auto it = state_->cache.find(key); it != state_->cache.end()) return {it->second, true, false};
  }

  std::string failure;
  if (state_->client) {
    const auto body = chat_request_body(req, cfg_);
    nlohmann::json audit = {{"component", req.component}, {"end", to_string(req.end)}, {"request", body}};
    try {
      const auto response =
          state_->client->post("/chat/completions", body,
                               RetryPolicy{cfg_.max_retries, std::chrono::milliseconds(cfg_.retry_base_delay_ms)});
      audit["response"] = response;
      std::string name = sanitize_name(extract_content(response));
      if (name.empty()) throw Error("endpoint returned an empty name");
      if (state_->audit_path) {
        std::lock_guard lock(state_->audit_mutex);
        std::ofstream(*state_->audit_path, std::ios::app) << audit.dump() << '\n';
      }
      std::unique_lock lock(state_->cache_mutex);
      state_->cache[key] = name;
      if (state_->cache_path) {
        const nlohmann::ordered_json entry = {{"key", key},
                                              {"name", name},
                                              {"component", req.component},
                                              {"end", to_string(req.end)},
                                              {"style", to_string(req.style)},
                                              {"model", cfg_.model}};
        std::ofstream(*state_->cache_path, std::ios::app) << entry.dump() << '\n';
      }
      return {std::move(name), false, false};
    } catch (const std::exception& e) {
      failure = e.what();
      audit["error"] = failure;
      if (state_->audit_path) {
        std::lock_guard lock(state_->audit_mutex);
        std::ofstream(*state_->audit_path, std::ios::app) << audit.dump() << '\n';
      }
    }
  } else {
    failure = "naming endpoint disabled";
  }

  if (!cfg_.fallback) throw Error("naming component " + std::to_string(req.component) + " failed: " + failure);
  log::warn("naming.fallback", {{"component", req.component}, {"end", to_string(req.end)}, {"reason", failure}});
  return {sanitize_name(fallback_name(req.words)), false, true};
}

std::string name_component(const NamingRequest& req, const ChatEndpointConfig& cfg) {
  Namer namer(cfg);
  return namer.name(req).name;
}

NameAllReport name_all(const RepresentationMatrix& n, const Vocabulary& vocab, std::vector<ComponentMeta> metas,
                       Namer& namer, const NameAllOptions& options) {
  if (metas.size() != n.cols()) throw Error("name_all: metadata count does not match components");
  struct Job {
    std::size_t meta;
    End end;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < metas.size(); ++i) {
    jobs.push_back({i, End::positive});
    jobs.push_back({i, End::negative});
  }
  std::vector<std::optional<NamingResult>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto& job = jobs[j];
      try {
        NamingRequest req;
        req.component = metas[job.meta].index;
        req.end = job.end;
        req.style = options.style;
        req.words = top_words(n, vocab, metas[job.meta].index, job.end, options.words_per_end);
        results[j] = namer.name(req);
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
    }
  };
  const std::size_t threads = std::min(namer.config().concurrency, jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  NameAllReport report;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    auto& meta = metas[jobs[j].meta];
    if (!results[j]) {
      report.failures.push_back({meta.index, jobs[j].end, errors[j]});
      continue;
    }
    report.cache_hits += results[j]->from_cache ? 1 : 0;
    report.fallbacks += results[j]->from_fallback ? 1 : 0;
    (jobs[j].end == End::positive ? meta.positive_name : meta.negative_name) = results[j]->name;
  }
  for (auto& meta : metas) meta.chosen_name = select_name(meta.orientation, meta.positive_name, meta.negative_name);
  report.metas = std::move(metas);
  return report;
}

}  // namespace semcomp
