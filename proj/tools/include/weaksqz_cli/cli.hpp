#pragma once

#include <iosfwd>

namespace weaksqz {

/// Entry point of the `weaksqz` tool. Results go to files and `out`,
/// diagnostics to `err`. Returns 0 on success, 1 on a usage or validation
/// error, 2 on a numerical failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace weaksqz
