#include "omdp/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace omdp::log {

namespace {

Level from_env() {
    const char* value = std::getenv("OMDP_LOG_LEVEL");
    if (!value) return Level::Warn;
    std::string v(value);
    if (v == "error") return Level::Error;
    if (v == "info") return Level::Info;
    if (v == "debug") return Level::Debug;
    return Level::Warn;
}

std::atomic<int>& level_store() {
    static std::atomic<int> level{static_cast<int>(from_env())};
    return level;
}

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

const char* tag(Level level) {
    switch (level) {
        case Level::Error: return "error";
        case Level::Warn: return "warn";
        case Level::Info: return "info";
        case Level::Debug: return "debug";
    }
    return "?";
}

}  // namespace

Level current_level() { return static_cast<Level>(level_store().load()); }

void set_level(Level level) { level_store().store(static_cast<int>(level)); }

void write(Level level, const std::string& message) {
    std::lock_guard<std::mutex> lock(sink_mutex());
    std::cerr << "[omdp " << tag(level) << "] " << message << '\n';
}

}  // namespace omdp::log
