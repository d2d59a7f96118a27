#ifndef QTHERM_ERRORS_HPP
#define QTHERM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qtherm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LayoutConflict : Error {
  using Error::Error;
};
struct UnknownSubsystem : Error {
  using Error::Error;
};
struct NotUnitary : Error {
  using Error::Error;
};
struct InvalidMeasurement : Error {
  using Error::Error;
};
struct InvalidState : Error {
  using Error::Error;
};
struct InvalidDistribution : Error {
  using Error::Error;
};
struct NumericalFailure : Error {
  using Error::Error;
};
struct ApparatusNotReady : Error {
  using Error::Error;
};
struct Singularity : Error {
  using Error::Error;
};
struct EmptyChamber : Error {
  using Error::Error;
};
struct OccupiedChamber : Error {
  using Error::Error;
};
struct UnknownPosition : Error {
  using Error::Error;
};
struct ResetInfeasible : Error {
  using Error::Error;
};

// Raised by the protocol engine; carries the offending step index.
struct StepError : Error {
  StepError(int step_id, const std::string& what)
      : Error("step " + std::to_string(step_id) + ": " + what), step_id(step_id) {}
  int step_id;
};

}  // namespace qtherm

#endif
