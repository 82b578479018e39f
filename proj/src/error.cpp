#include "lmloc/error.hpp"

namespace lmloc {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::format: return "format";
    case ErrorCategory::data: return "data";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

}  // namespace lmloc
