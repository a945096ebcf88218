#include "gazehead/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

#include "gazehead/error.hpp"

namespace gazehead {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Config: return "config";
    case ErrorCode::Contract: return "contract";
    case ErrorCode::Io: return "io";
    case ErrorCode::FormatVersion: return "format-version";
    case ErrorCode::Numeric: return "numeric";
  }
  return "unknown";
}

namespace log {
namespace {

std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;
Sink g_sink;

const char* level_tag(Level level) {
  switch (level) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
    case Level::Off: return "off";
  }
  return "?";
}

}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void set_sink(Sink sink) {
  std::lock_guard<std::mutex> lock(g_mutex);
  g_sink = std::move(sink);
}

void write(Level lvl, const std::string& message) {
  if (lvl < g_level.load() || lvl == Level::Off) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  if (g_sink) {
    g_sink(lvl, message);
  } else {
    std::fprintf(stderr, "[%s] %s\n", level_tag(lvl), message.c_str());
  }
}

}  // namespace log
}  // namespace gazehead
