#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace promine::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

void set_level(Level level);
Level level();

void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);
void error(std::string_view msg);

// Named event counters (tie-breaks, unknown levels, degenerate folds).
// Counting is always on, independent of the print level.
void count_event(std::string_view name);
std::uint64_t event_count(std::string_view name);
void reset_events();

}  // namespace promine::log
