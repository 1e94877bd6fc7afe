#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace inmargin
{

enum class ErrorKind
{
  invalid_argument,
  unsupported_kernel,
  invalid_metric,
  nonconverged,
  infeasible,
  degenerate_gradient,
  degenerate_solution,
  projection_failure,
  parse_error,
  io_error,
};

inline const char * to_string(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::unsupported_kernel: return "unsupported-kernel";
    case ErrorKind::invalid_metric: return "invalid-metric";
    case ErrorKind::nonconverged: return "nonconverged";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::degenerate_gradient: return "degenerate-gradient";
    case ErrorKind::degenerate_solution: return "degenerate-solution";
    case ErrorKind::projection_failure: return "projection-failure";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

/// Library error. `index()` names the offending sample (or file line for
/// parse errors) when there is one.
class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string & what, std::optional<std::size_t> index = std::nullopt)
  : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), index_(index)
  {
  }

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

private:
  ErrorKind kind_;
  std::optional<std::size_t> index_;
};

}  // namespace inmargin
