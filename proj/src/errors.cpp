#include "adh/errors.hpp"

namespace adh {

namespace {
std::string join(const std::vector<std::string>& problems) {
  if (problems.empty()) return "invalid configuration";
  std::string out = problems.front();
  for (std::size_t i = 1; i < problems.size(); ++i) out += "; " + problems[i];
  return out;
}
}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems) : Error(join(problems)), problems_(std::move(problems)) {}

}  // namespace adh
