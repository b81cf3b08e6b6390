#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent array shapes when building a model or instance.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A shift T_j^{a,a'} was requested on a policy that does not select gear a at j.
class InvalidShift : public Error {
 public:
  InvalidShift(std::size_t state, int from, int to, const std::string& why);
  std::size_t state;
  int from;
  int to;
};

/// Two policies (or a policy and a model) disagree on the state set.
class PolicyMismatch : public Error {
 public:
  using Error::Error;
};

/// The marginal productivity ratio f/g is undefined because g is not positive.
class MpUndefined : public Error {
 public:
  MpUndefined(std::size_t state, int from, int to, double g);
  std::size_t state;
  int from;
  int to;
  double g;
};

/// A policy family has no legal single-gear move out of a member it should.
class ConnectednessError : public Error {
 public:
  ConnectednessError(const std::string& what, std::vector<int> gears)
      : Error(what), stuck_gears(std::move(gears)) {}
  std::vector<int> stuck_gears;  // gear per state of the stuck policy
};

/// bracket_dai found no sign change of the gear-comparison function.
class UnbracketableError : public Error {
 public:
  using Error::Error;
};

/// An exact product-space computation would exceed the configured size cap.
class SizeCapExceeded : public Error {
 public:
  SizeCapExceeded(const std::string& what, double size, double cap);
  double size;
  double cap;
};

/// Average-criterion evaluation hit a policy with more than one recurrent class.
class MultichainError : public Error {
 public:
  using Error::Error;
};

/// A linear solve failed (singular or non-finite result).
class NumericFailure : public Error {
 public:
  using Error::Error;
};

/// Malformed model, instance, table or policy-list document.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace mgb
