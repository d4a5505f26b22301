#pragma once

#include <stdexcept>
#include <string>

namespace hysteresim {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An initial condition violates its band constraint (|s0| > rho and friends).
struct InvalidInit : Error {
  using Error::Error;
};

// A Prandtl-Ishlinskii operator violates its admissibility conditions.
struct InvalidPi : Error {
  using Error::Error;
};

// Inversion requested for an operator with a nonpositive partial weight sum.
struct NonInvertible : Error {
  using Error::Error;
};

// A brute-force oracle was asked for more work than its configured budget.
struct BudgetExceeded : Error {
  using Error::Error;
};

// A per-step linear branch system is singular.
struct SingularBranch : Error {
  using Error::Error;
};

// No saturation branch yields a solution consistent with its own region.
struct NoConsistentBranch : Error {
  using Error::Error;
};

// A closed-form expression is undefined for these parameters (e.g. c1 = 1).
struct Degenerate : Error {
  using Error::Error;
};

// A requested point lies outside the admissible parameter range of a set.
struct OutOfBand : Error {
  using Error::Error;
};

// The Lyapunov mixing weight lies outside its admissible interval.
struct InadmissibleLambda : Error {
  using Error::Error;
};

// A scripted noise source was sampled beyond the end of its table.
struct ScriptExhausted : Error {
  using Error::Error;
};

// A configuration file could not be parsed at all.
struct ParseError : Error {
  using Error::Error;
};

// A configuration parsed but violates a documented constraint.
struct ValidationError : Error {
  using Error::Error;
};

}  // namespace hysteresim
