#ifndef PFE_TOOLS_COMMANDS_HPP
#define PFE_TOOLS_COMMANDS_HPP

#include <ostream>
#include <string>
#include <vector>

namespace pfe {
namespace cli {

// Runs one CLI invocation (args excludes the program name). Returns the
// process exit code: 0 success, 1 usage error, 2 data/config error.
int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

}  // namespace cli
}  // namespace pfe

#endif  // PFE_TOOLS_COMMANDS_HPP
