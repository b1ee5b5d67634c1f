#ifndef TRANSSENT_CLI_HPP
#define TRANSSENT_CLI_HPP

#include <string>
#include <vector>

namespace transsent::cli {

// Entry point behind the binary; returns the process exit code.
// 0 success, 1 usage error, 2 data error, 3 numerical failure.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace transsent::cli

#endif  // TRANSSENT_CLI_HPP
