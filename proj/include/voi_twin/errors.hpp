#pragma once

#include <stdexcept>
#include <string>

namespace voi_twin {

class TwinError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid scenario, model or training parameters.
class ConfigError : public TwinError {
 public:
  using TwinError::TwinError;
};

// Caller broke a shape or precondition contract.
class ContractError : public TwinError {
 public:
  using TwinError::TwinError;
};

class NumericalError : public TwinError {
 public:
  using TwinError::TwinError;
};

class UnavailableSensorError : public TwinError {
 public:
  using TwinError::TwinError;
};

// Linearization point coincides with an anchor.
class DegenerateGeometryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EmptyScheduleError : public ContractError {
 public:
  using ContractError::ContractError;
};

class GraphError : public ContractError {
 public:
  using ContractError::ContractError;
};

class IoError : public TwinError {
 public:
  using TwinError::TwinError;
};

}  // namespace voi_twin
