#pragma once

#include <stdexcept>
#include <string>

namespace prosumer {

// Configuration / usage problems: bad config keys, invalid parameter ranges.
// CLI exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Problems with input data files: parse failures, schema violations.
// CLI exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CorruptFileError : DataError {
    explicit CorruptFileError(const std::string& msg) : DataError(msg) {}
};

struct VersionError : DataError {
    VersionError(int found, int expected, const std::string& path)
        : DataError("unsupported format_version " + std::to_string(found) + " in " + path +
                    " (this build reads version " + std::to_string(expected) + ")"),
          found(found),
          expected(expected) {}
    int found;
    int expected;
};

// An action was applied in a state where it violates a storage bound.
struct InfeasibleActionError : std::runtime_error {
    explicit InfeasibleActionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated internal invariant; indicates a bug. CLI exit code 3.
struct InternalError : std::logic_error {
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace prosumer
