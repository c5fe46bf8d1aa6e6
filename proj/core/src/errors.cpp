#include "fond/errors.hpp"

namespace fond {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::degenerate_input: return "degenerate_input";
        case ErrorKind::contract: return "contract";
        case ErrorKind::config: return "config";
        case ErrorKind::numerical: return "numerical";
        case ErrorKind::io: return "io";
        case ErrorKind::parse: return "parse";
        case ErrorKind::plan_mismatch: return "plan_mismatch";
    }
    return "unknown";
}

}  // namespace fond
