#ifndef FAUN_TOOLS_COMMANDS_HPP_
#define FAUN_TOOLS_COMMANDS_HPP_

#include <ostream>

namespace faun::cli {

/// Exit codes of the faun tool.
enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Parses argv and dispatches to run / cost / sweep.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace faun::cli

#endif  // FAUN_TOOLS_COMMANDS_HPP_
