#pragma once

#include <ostream>

namespace splatcage {

/// Entry point of the `splatcage` tool. Returns the process exit code:
/// 0 on success, 1 for usage errors, 2 for library errors, which are printed
/// to `err` as a single line `error=<Code> message="..."`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace splatcage
