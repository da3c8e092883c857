#ifndef OLNMT_CLI_HPP
#define OLNMT_CLI_HPP

#include <string>
#include <vector>

namespace olnmt {

inline constexpr const char* kToolVersion = "0.1.0";

// Entry point behind the olnmt binary; args exclude the program name.
// Returns the process exit code; failures print one "error: ..." line.
int run_cli(std::vector<std::string> args);

}  // namespace olnmt

#endif  // OLNMT_CLI_HPP
