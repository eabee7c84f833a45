#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bos::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Parses `args` (without the program name) and runs the named subcommand.
/// Returns 0 on success, 1 on parse or validation errors, 2 on runtime failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

const char* version();

}  // namespace bos::cli
