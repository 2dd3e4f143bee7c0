#pragma once

#include <stdexcept>
#include <string>

namespace r2d2 {

enum class ErrorKind {
  kParameter,           // invalid distribution / model parameter
  kSingularCovariance,  // Cholesky failed after the jitter policy
  kConfiguration,       // inconsistent kernel / layout / config
  kDegeneratePrior,     // mu_S or sigma2_S collapsed (e.g. CS with rho = 1)
  kInput,               // malformed data file or config document
  kSampler,             // a sampler step failed mid-run
  kSimulationFailures,  // too many failed replicates
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace r2d2
