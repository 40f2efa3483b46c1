#include "specloop/error.hpp"

namespace specloop {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::budget_expired: return "budget_expired";
    case ErrorKind::debounced: return "debounced";
    case ErrorKind::busy: return "busy";
    case ErrorKind::rejected: return "rejected";
    case ErrorKind::transport: return "transport";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::fixture_miss: return "fixture_miss";
    case ErrorKind::extraction: return "extraction";
    case ErrorKind::environment: return "environment";
    case ErrorKind::harness: return "harness";
    case ErrorKind::storage: return "storage";
    case ErrorKind::domain: return "domain";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

}  // namespace specloop
