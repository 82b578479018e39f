#pragma once

#include <iosfwd>

namespace lmloc {

/// Exit codes: 0 success, 1 usage error, 2 data, format or io error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lmloc
