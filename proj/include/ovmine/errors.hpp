#pragma once

#include <stdexcept>
#include <string>

namespace ovmine {

/// Invalid configuration or malformed input data.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller violated an API contract (mismatched lengths, wrong state).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace ovmine
