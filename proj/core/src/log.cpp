#include "pfe/log.hpp"

#include <cstdlib>
#include <iostream>

namespace pfe {
namespace log {

static Level ParseLevel() {
  const char* env = std::getenv("PFE_LOG");
  if (env == nullptr) return Level::kError;
  const std::string v(env);
  if (v == "debug") return Level::kDebug;
  if (v == "info") return Level::kInfo;
  return Level::kError;
}

Level threshold() {
  static const Level level = ParseLevel();
  return level;
}

void warn(const std::string& message) {
  std::cerr << "pfe: warning: " << message << std::endl;
}

void info(const std::string& message) {
  if (threshold() >= Level::kInfo)
    std::cerr << "pfe: " << message << std::endl;
}

void debug(const std::string& message) {
  if (threshold() >= Level::kDebug)
    std::cerr << "pfe: debug: " << message << std::endl;
}

}  // namespace log
}  // namespace pfe
