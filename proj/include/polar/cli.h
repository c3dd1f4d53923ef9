#ifndef POLAR_CLI_H_
#define POLAR_CLI_H_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace polar::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // an analysis or I/O step failed
inline constexpr int kExitUsage = 2;    // bad command line or configuration

// Runs one subcommand. `args` excludes the program name. Option values are
// resolved from flags, then POLAR_* environment variables, then the file
// named by --config, then built-in defaults.
int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path &path);

}  // namespace polar::cli

#endif  // POLAR_CLI_H_
