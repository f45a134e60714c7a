#pragma once

#include <functional>
#include <string_view>

#include <json.hpp>

namespace semcomp::log {

enum class Level { debug, info, warn, error };

using Sink = std::function<void(Level, std::string_view event, const nlohmann::json& fields)>;

/// Emits one JSON object per line: {"level":..,"event":..,<fields>}.
void emit(Level level, std::string_view event, const nlohmann::json& fields = nlohmann::json::object());

inline void info(std::string_view event, const nlohmann::json& fields = nlohmann::json::object()) {
  emit(Level::info, event, fields);
}
inline void warn(std::string_view event, const nlohmann::json& fields = nlohmann::json::object()) {
  emit(Level::warn, event, fields);
}

/// Replaces the process-wide sink (stderr by default). Returns the previous one.
Sink set_sink(Sink sink);
void set_min_level(Level level);

/// RAII capture used by tests and by the CLI's --quiet mode.
class ScopedSink {
 public:
  explicit ScopedSink(Sink sink) : previous_(set_sink(std::move(sink))) {}
  ~ScopedSink() { set_sink(std::move(previous_)); }
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;

 private:
  Sink previous_;
};

}  // namespace semcomp::log
