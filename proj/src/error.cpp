#include "remfpca/error.hpp"

namespace remfpca {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidConfig: return "E_CONFIG";
        case ErrorCode::Domain: return "E_DOMAIN";
        case ErrorCode::DimensionMismatch: return "E_DIMENSION";
        case ErrorCode::Underdetermined: return "E_UNDERDETERMINED";
        case ErrorCode::RankDeficient: return "E_RANK";
        case ErrorCode::InsufficientSamples: return "E_SAMPLES";
        case ErrorCode::DegenerateVariable: return "E_DEGENERATE";
        case ErrorCode::Factorization: return "E_FACTORIZATION";
        case ErrorCode::InvalidK: return "E_INVALID_K";
        case ErrorCode::Tuning: return "E_TUNING";
        case ErrorCode::Io: return "E_IO";
        case ErrorCode::Parse: return "E_PARSE";
        case ErrorCode::Checksum: return "E_CHECKSUM";
    }
    return "E_UNKNOWN";
}

int exit_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidConfig:
        case ErrorCode::Domain:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::InvalidK:
        case ErrorCode::Parse:
            return 2;
        case ErrorCode::Underdetermined:
        case ErrorCode::RankDeficient:
        case ErrorCode::InsufficientSamples:
        case ErrorCode::DegenerateVariable:
        case ErrorCode::Factorization:
        case ErrorCode::Tuning:
            return 3;
        case ErrorCode::Io:
        case ErrorCode::Checksum:
            return 4;
    }
    return 1;
}

}  // namespace remfpca
