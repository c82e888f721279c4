#pragma once

#include <stdexcept>
#include <string>

namespace remfpca {

enum class ErrorCode {
    InvalidConfig,
    Domain,
    DimensionMismatch,
    Underdetermined,
    RankDeficient,
    InsufficientSamples,
    DegenerateVariable,
    Factorization,
    InvalidK,
    Tuning,
    Io,
    Parse,
    Checksum,
};

// Every failure raised by the library carries one of the codes above so the
// CLI can map it onto a machine-readable record and an exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Stable identifier used in the CLI error JSON, e.g. "E_IO".
const char* error_code_name(ErrorCode code) noexcept;

/// Process exit status: 2 configuration, 3 numeric failure, 4 I/O.
int exit_status(ErrorCode code) noexcept;

}  // namespace remfpca
