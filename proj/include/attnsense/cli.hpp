#ifndef ATTNSENSE_CLI_HPP
#define ATTNSENSE_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace attnsense::cli {

enum ExitCode : int {
    kOk = 0,
    kContractFailure = 1,  // contract or validation failure
    kIoFailure = 2,        // I/O, parse or usage failure
};

/// Runs one command line. `args` excludes the program name. Files are the
/// only outputs; `out` gets a short human-readable summary and `err` gets
/// one JSON error line on failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace attnsense::cli

#endif  // ATTNSENSE_CLI_HPP
