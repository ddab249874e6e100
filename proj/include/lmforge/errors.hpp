#pragma once

#include <stdexcept>
#include <string>

namespace lmforge {

// Every failure surfaced by the library is one of these kinds. The CLI maps
// them onto exit codes (usage -> 1, numerical -> 3, everything else -> 2).
enum class ErrorKind {
  usage,
  dimension,
  domain,
  contract,
  degenerate_input,
  index,
  data,
  numerical,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindError : public Error {
 public:
  explicit KindError(const std::string& what) : Error(K, what) {}
};

using UsageError = KindError<ErrorKind::usage>;
using DimensionError = KindError<ErrorKind::dimension>;
using DomainError = KindError<ErrorKind::domain>;
using ContractError = KindError<ErrorKind::contract>;
using DegenerateInputError = KindError<ErrorKind::degenerate_input>;
using IndexError = KindError<ErrorKind::index>;
using DataError = KindError<ErrorKind::data>;
using NumericalError = KindError<ErrorKind::numerical>;

}  // namespace lmforge
