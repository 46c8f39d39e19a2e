#pragma once

#include <stdexcept>
#include <string>

namespace quadshift {

/// Base for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario/config validation failure. `field()` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Initial packet does not fit the grid; enlarge the grid.
class PacketTooWide : public Error {
 public:
  using Error::Error;
};

/// An integrator produced NaN/Inf; usually dt is too large for the coefficients.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

/// Differential and integral forms of the phase accumulator disagree.
class CrossCheckFailure : public Error {
 public:
  using Error::Error;
};

class QuadratureFailure : public Error {
 public:
  using Error::Error;
};

/// A pivot of the implicit step collapsed relative to its row scale.
class SolverBreakdown : public Error {
 public:
  using Error::Error;
};

/// Probability reached the grid margins; the run is no longer trustworthy.
class BoundaryLeak : public Error {
 public:
  BoundaryLeak(double t, double leak)
      : Error("boundary leak " + std::to_string(leak) + " at t=" + std::to_string(t)),
        t_(t),
        leak_(leak) {}

  double time() const noexcept { return t_; }
  double leak() const noexcept { return leak_; }

 private:
  double t_;
  double leak_;
};

/// Spectral translation would wrap around the periodic grid.
class AliasedShift : public Error {
 public:
  using Error::Error;
};

/// Packet too narrow in momentum for the momentum lattice.
class UnderResolved : public Error {
 public:
  using Error::Error;
};

}  // namespace quadshift
