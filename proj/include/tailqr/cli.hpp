#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tailqr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Raised for anything the user has to fix in the config or flags.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kOutputDirEnv = "TAILQR_OUTPUT_DIR";
inline constexpr const char* kVersion = "0.3.0";

/// Entry point of the `tailqr` executable; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace tailqr::cli
