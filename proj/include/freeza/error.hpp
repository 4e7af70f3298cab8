#pragma once

#include <stdexcept>
#include <string>

namespace freeza {

// Error with a short machine-readable code ("invalid-spec", "parse", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace freeza
