#pragma once

#include <stdexcept>
#include <string>

namespace smoothbandit {

// Invalid numeric parameter (horizon, smoothness, resolution, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input point outside the domain an operation is defined on.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke a documented precondition on a value's structure.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Instance construction failed one of its declared inequalities.
class ConstructionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Requested capability is not provided by this object.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace smoothbandit
