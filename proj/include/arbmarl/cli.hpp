#pragma once

#include <iosfwd>

namespace arbmarl {

/// Entry point of the `arbmarl` command line tool. Returns 0 on success, 1 on
/// a domain error and 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace arbmarl
