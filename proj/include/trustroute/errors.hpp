#pragma once

#include <stdexcept>
#include <string>

namespace trustroute {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition on a public operation.
class ContractError : public Error {
 public:
  using Error::Error;
};

class BiasParseError : public Error {
 public:
  using Error::Error;
};

// Transport failure after retries, or a malformed provider payload.
class ProviderError : public Error {
 public:
  using Error::Error;
};

class RetrievalError : public Error {
 public:
  using Error::Error;
};

class AllocatorError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

}  // namespace trustroute
