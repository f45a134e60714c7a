#include "semcomp/log.hpp"

#include <iostream>
#include <mutex>

namespace semcomp::log {
namespace {

std::string_view level_name(Level level) {
  switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
  }
  return "info";
}

void stderr_sink(Level level, std::string_view event, const nlohmann::json& fields) {
  nlohmann::ordered_json line;
  line["level"] = level_name(level);
  line["event"] = event;
  for (const auto& [key, value] : fields.items()) line[key] = value;
  std::cerr << line.dump() << '\n';
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink = stderr_sink;
  return sink;
}

Level& min_level() {
  static Level level = Level::info;
  return level;
}

}  // namespace

void emit(Level level, std::string_view event, const nlohmann::json& fields) {
  std::lock_guard lock(sink_mutex());
  if (level < min_level()) return;
  if (current_sink()) current_sink()(level, event, fields);
}

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  Sink previous = std::move(current_sink());
  current_sink() = sink ? std::move(sink) : Sink(stderr_sink);
  return previous;
}

void set_min_level(Level level) {
  std::lock_guard lock(sink_mutex());
  min_level() = level;
}

}  // namespace semcomp::log
