#ifndef GENCOV_ERROR_HPP
#define GENCOV_ERROR_HPP

#include <stdexcept>
#include <string>

namespace gencov {

enum class ErrorKind {
  config,        // bad option / flag combination
  parse,         // malformed input file content
  data,          // semantically invalid data (duplicate id, bad outcome, ...)
  shape,         // dimension mismatch
  alignment,     // shared id with conflicting covariates
  degenerate,    // not enough data to estimate (variance, split, class, ...)
  convergence,   // solver did not converge
  generation,    // simulation could not produce the requested sample
  unsupported,   // design outside this estimator's contract
  io             // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace gencov

#endif
