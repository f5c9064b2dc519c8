#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace adh {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Schema or parameter problems in user input. Carries one message per
/// offending path.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  explicit ConfigError(const std::string& problem)
      : ConfigError(std::vector<std::string>{problem}) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// The model broke a declared contract at run time (negative rate, rate above
/// the thinning majorant, explosion cap reached).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Requested operation is not defined for this kind of input.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace adh
