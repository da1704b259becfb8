#include "promine/log.hpp"

#include <atomic>
#include <iostream>
#include <map>
#include <mutex>

namespace promine::log {
namespace {

std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

std::map<std::string, std::uint64_t, std::less<>>& counters() {
  static std::map<std::string, std::uint64_t, std::less<>> c;
  return c;
}

void emit(Level lvl, const char* tag, std::string_view msg) {
  if (lvl < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "[promine " << tag << "] " << msg << '\n';
}

}  // namespace

void set_level(Level lvl) { g_level.store(lvl); }
Level level() { return g_level.load(); }

void debug(std::string_view msg) { emit(Level::debug, "debug", msg); }
void info(std::string_view msg) { emit(Level::info, "info", msg); }
void warn(std::string_view msg) { emit(Level::warn, "warn", msg); }
void error(std::string_view msg) { emit(Level::error, "error", msg); }

void count_event(std::string_view name) {
  std::lock_guard lock(g_mutex);
  auto& c = counters();
  auto it = c.find(name);
  if (it == c.end())
    c.emplace(std::string(name), 1);
  else
    ++it->second;
}

std::uint64_t event_count(std::string_view name) {
  std::lock_guard lock(g_mutex);
  auto& c = counters();
  auto it = c.find(name);
  return it == c.end() ? 0 : it->second;
}

void reset_events() {
  std::lock_guard lock(g_mutex);
  counters().clear();
}

}  // namespace promine::log
