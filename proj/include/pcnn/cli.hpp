#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace pcnn::cli {

enum ExitCode : int {
    kOk = 0,
    kViolationFound = 1,
    kUsageError = 2,
    kRuntimeError = 3,
};

// Parsed command line. `flags` holds every option that was set, by long name without
// dashes; values from --config are merged in, with explicit flags winning.
struct CliInvocation {
    std::string subcommand;
    std::map<std::string, std::string> flags;
    std::optional<std::string> config_path;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// args excludes the program name. Throws UsageError on unknown subcommands or flags,
// or on flags that do not apply to the subcommand.
CliInvocation parse_invocation(const std::vector<std::string>& args);

int run(const CliInvocation& invocation, std::ostream& out, std::ostream& err);

// Parse and run; usage problems are reported on err with kUsageError.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string usage();

}  // namespace pcnn::cli
