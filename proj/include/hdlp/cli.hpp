#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hdlp::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Environment variable consulted for the default worker count.
inline constexpr const char* kWorkersEnv = "HDLP_WORKERS";

enum ExitCode : int { kSuccess = 0, kFailure = 1, kUsage = 2 };

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

} // namespace hdlp::cli
