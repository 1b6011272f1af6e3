#pragma once

#include <stdexcept>
#include <string>

namespace walkin {

// Argument outside a function's mathematical domain (negative time, nonpositive rate, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InvalidSchedule : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Read outside the triangular validity region of a WaitTable, or a segment/time mismatch.
class ValidityError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Equilibrium-density denominator vanished: no state mass that an arrival could displace.
class DegenerateState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The cdf cannot reach one for any admissible atom / support start.
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace walkin
