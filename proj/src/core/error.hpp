#pragma once

#include <stdexcept>
#include <string>

namespace mpap {

// Error categories map 1:1 onto process exit codes and C API status values.
enum class ErrorCode : int {
  usage = 1,        // bad configuration / bad arguments
  data = 2,         // malformed or degenerate input data
  convergence = 3,  // an iterative procedure failed to converge
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorCode::usage, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorCode::data, what) {}
};

struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& what) : Error(ErrorCode::convergence, what) {}
};

}  // namespace mpap
