#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sievekit::cli {

/// Runs one command line (without the program name). Returns the process exit
/// code: 0 success, 1 usage, 2 data, 3 degeneracy.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version();

std::string sha256_hex(const std::string& bytes);
/// Throws ParseError when the file cannot be read.
std::string sha256_file(const std::string& path);

}  // namespace sievekit::cli
