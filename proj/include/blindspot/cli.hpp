#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace blindspot::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Runs the `blindspot` command line. args excludes the program name.
// Returns 0 on success, 1 on usage errors and 2 on data errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version();

// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::string& path);

}  // namespace blindspot::cli
