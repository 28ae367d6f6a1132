#pragma once

#include <stdexcept>
#include <string>

namespace meanfield {

/// Base of every error raised by the library. `kind()` is the stable,
/// machine-readable name used in the CLI's JSON error records.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }
  virtual int exit_code() const noexcept { return 1; }

 private:
  std::string kind_;
};

/// Invalid configuration or input data (CLI exit code 2).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("ConfigError", what) {}
  int exit_code() const noexcept override { return 2; }

 protected:
  ConfigError(std::string kind, const std::string& what) : Error(std::move(kind), what) {}
};

/// Numerical failure of a computation (CLI exit code 3).
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error("NumericalError", what) {}
  int exit_code() const noexcept override { return 3; }

 protected:
  NumericalError(std::string kind, const std::string& what) : Error(std::move(kind), what) {}
};

#define MEANFIELD_DEFINE_ERROR(Name, Base) \
  class Name : public Base {               \
   public:                                 \
    explicit Name(const std::string& what) : Base(#Name, what) {} \
  };

MEANFIELD_DEFINE_ERROR(NonIntegrableSingularity, NumericalError)
MEANFIELD_DEFINE_ERROR(DivergentIntegral, NumericalError)
MEANFIELD_DEFINE_ERROR(CFLViolation, NumericalError)
MEANFIELD_DEFINE_ERROR(WeightOverflow, NumericalError)
MEANFIELD_DEFINE_ERROR(Overflow, NumericalError)

MEANFIELD_DEFINE_ERROR(CorruptCheckpoint, ConfigError)
MEANFIELD_DEFINE_ERROR(GridTooCoarse, ConfigError)
MEANFIELD_DEFINE_ERROR(GridMismatch, ConfigError)
MEANFIELD_DEFINE_ERROR(ExponentViolation, ConfigError)
MEANFIELD_DEFINE_ERROR(OutOfRegime, ConfigError)
MEANFIELD_DEFINE_ERROR(MissingData, ConfigError)

#undef MEANFIELD_DEFINE_ERROR

/// A particle coordinate became NaN/Inf. Carries where it happened so a
/// run can report the offending replica and step.
class NonFiniteState : public NumericalError {
 public:
  NonFiniteState(const std::string& what, long long replica, unsigned long long step,
                 long long particle)
      : NumericalError("NonFiniteState", what),
        replica_(replica),
        step_(step),
        particle_(particle) {}
  long long replica() const noexcept { return replica_; }
  unsigned long long step() const noexcept { return step_; }
  long long particle() const noexcept { return particle_; }

 private:
  long long replica_;
  unsigned long long step_;
  long long particle_;
};

}  // namespace meanfield
