#include "lmforge/errors.hpp"

namespace lmforge {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::domain: return "domain";
    case ErrorKind::contract: return "contract";
    case ErrorKind::degenerate_input: return "degenerate-input";
    case ErrorKind::index: return "index";
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

}  // namespace lmforge
