#include "fluidctl/common.hpp"

namespace fluidctl {
namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string out = "validation failed";
  for (const auto& s : issues) {
    out += "\n  ";
    out += s;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

}  // namespace fluidctl
