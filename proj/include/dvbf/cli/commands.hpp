#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dvbf::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kNumeric = 4 };

// Entry point of the dvbf command-line tool; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dvbf::cli
