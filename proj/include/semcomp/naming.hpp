#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semcomp/features.hpp"
#include "semcomp/types.hpp"

namespace semcomp {

inline constexpr std::string_view kNamingSystemMessage =
    "You are a Conceptual Grouping and Naming System, designed to analyze a given group of words and identify a "
    "common theme or characteristic.";
inline constexpr std::string_view kNamingPrompt =
    "Given the following group of words, provide a short name that encapsulates what they have in common.";
inline constexpr std::string_view kOneWordSentence = "If possible, use just one word.";

inline constexpr std::size_t kMaxNameLength = 40;
inline constexpr std::size_t kMaxNamingWords = 100;

enum class NamingStyle { one_word, unconstrained };

std::string_view to_string(NamingStyle style);
NamingStyle parse_naming_style(std::string_view name);

struct NamingRequest {
  std::size_t component = 0;
  End end = End::positive;
  std::vector<std::string> words;
  NamingStyle style = NamingStyle::one_word;

  void validate() const;
};

struct ChatEndpointConfig {
  std::string base_url = "https://api.openai.com/v1";  ///< empty disables the endpoint
  std::string model = "gpt-4o";
  std::string api_key;  ///< taken from SEMCOMP_API_KEY when empty
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double temperature = 0.0;
  int retry_base_delay_ms = 500;
  std::size_t concurrency = 4;
  bool fallback = true;

  void validate() const;
};

/// User message: the naming prompt, the one-word sentence for one_word style,
/// then a blank line and the comma-separated words.
std::string naming_user_message(NamingStyle style, const std::vector<std::string>& words);
nlohmann::ordered_json chat_request_body(const NamingRequest& req, const ChatEndpointConfig& cfg);

/// First non-empty line, trimmed, without wrapping quotes or a trailing
/// period, cut to kMaxNameLength bytes on a UTF-8 boundary.
std::string sanitize_name(std::string_view raw);
/// First three words joined by '+'.
std::string fallback_name(const std::vector<std::string>& words);
std::string naming_cache_key(const NamingRequest& req, std::string_view model);

struct NamingResult {
  std::string name;
  bool from_cache = false;
  bool from_fallback = false;
};

/// Issues naming requests against a chat-completions endpoint, with a
/// JSON-lines response cache and an optional audit log of raw exchanges.
class Namer {
 public:
  explicit Namer(ChatEndpointConfig cfg, std::optional<std::filesystem::path> cache_path = std::nullopt,
                 std::optional<std::filesystem::path> audit_path = std::nullopt);
  ~Namer();
  Namer(const Namer&) = delete;
  Namer& operator=(const Namer&) = delete;

  NamingResult name(const NamingRequest& req);
  const ChatEndpointConfig& config() const { return cfg_; }

 private:
  struct State;
  ChatEndpointConfig cfg_;
  std::unique_ptr<State> state_;
};

/// One-off naming without cache or audit log.
std::string name_component(const NamingRequest& req, const ChatEndpointConfig& cfg);

struct NameAllOptions {
  std::size_t words_per_end = 30;
  NamingStyle style = NamingStyle::one_word;
};

struct NamingFailure {
  std::size_t component = 0;
  End end = End::positive;
  std::string message;
};

struct NameAllReport {
  std::vector<ComponentMeta> metas;
  std::vector<NamingFailure> failures;
  std::size_t cache_hits = 0;
  std::size_t fallbacks = 0;
};

/// Names both ends of every component and sets chosen_name from the
/// orientation. Failures are recorded per component; the batch continues.
NameAllReport name_all(const RepresentationMatrix& n, const Vocabulary& vocab, std::vector<ComponentMeta> metas,
                       Namer& namer, const NameAllOptions& options = {});

}  // namespace semcomp
