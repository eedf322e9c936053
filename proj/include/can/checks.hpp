#pragma once

#include <stdexcept>
#include <string>

namespace can {

// Rejected-input conditions (bad shapes, out-of-range parameters, malformed
// files). The CLI maps these to exit code 2.
inline void check_arg(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Runtime failures (non-finite activations, I/O errors). Exit code 1.
inline void check_run(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

}  // namespace can
