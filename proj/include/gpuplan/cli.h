#ifndef GPUPLAN_CLI_H_
#define GPUPLAN_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace gpuplan {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

// Entry point behind the gpuplan binary. `args` excludes the program name.
// Results go to `out` as JSON; domain errors become {"error","detail"} on
// `err` with status 1, and usage errors print help text with status 2.
int dispatch_command(const std::vector<std::string>& args, std::ostream& out,
                     std::ostream& err);

}  // namespace gpuplan

#endif  // GPUPLAN_CLI_H_
