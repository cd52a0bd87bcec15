#include "cntnet/errors.hpp"

namespace cntnet {

std::string_view to_string(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::Usage: return "usage";
        case ErrorCategory::Structural: return "structural";
        case ErrorCategory::Parameter: return "parameter";
        case ErrorCategory::Parse: return "parse";
        case ErrorCategory::Io: return "io";
        case ErrorCategory::Numeric: return "numeric";
    }
    return "unknown";
}

}  // namespace cntnet
