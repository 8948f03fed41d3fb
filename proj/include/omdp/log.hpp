// Minimal leveled logging to stderr. Level comes from OMDP_LOG_LEVEL
// (error, warn, info, debug); default is warn.
#pragma once

#include <sstream>
#include <string>

namespace omdp::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level current_level();
void set_level(Level level);
void write(Level level, const std::string& message);

template <class... Args>
void emit(Level level, const Args&... args) {
    if (level > current_level()) return;
    std::ostringstream out;
    out.precision(17);
    (out << ... << args);
    write(level, out.str());
}

template <class... Args> void warn(const Args&... args) { emit(Level::Warn, args...); }
template <class... Args> void info(const Args&... args) { emit(Level::Info, args...); }
template <class... Args> void debug(const Args&... args) { emit(Level::Debug, args...); }

}  // namespace omdp::log
