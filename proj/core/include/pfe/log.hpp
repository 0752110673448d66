#ifndef PFE_LOG_HPP
#define PFE_LOG_HPP

#include <string>

namespace pfe {
namespace log {

// Diagnostics go to stderr, gated by the PFE_LOG environment variable:
// "error" (default; errors and warnings), "info", "debug".
enum class Level { kError = 0, kInfo = 1, kDebug = 2 };

Level threshold();

void warn(const std::string& message);   // shown at every level
void info(const std::string& message);   // shown at info and debug
void debug(const std::string& message);  // shown at debug only

}  // namespace log
}  // namespace pfe

#endif  // PFE_LOG_HPP
