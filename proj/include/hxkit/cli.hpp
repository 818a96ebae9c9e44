#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hxkit::cli {

/// Exit codes: 0 success, 1 usage error, 2 data or I/O error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace hxkit::cli
