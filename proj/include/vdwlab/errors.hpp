#pragma once

#include <stdexcept>
#include <string>

namespace vdwlab {

// Failure categories surfaced by the library. Each maps to one guard or
// solver outcome; messages carry the measured numbers that triggered them.
enum class ErrorCode {
  invalid_grid,
  invalid_extent,
  cutoff_clipped,
  invalid_system,
  resource_limit,
  invalid_decomposition,
  convergence_failure,
  invalid_basis,
  screening_inapplicable,
  dependency_missing,
  invalid_induced_type,
  support_overlap,
  geometry,
  not_invertible,
  window_exit,
  deflation_failure,
  resolution,
  expansion_domain,
  boost_too_large,
  window,
  rigging,
  degenerate_state,
  validation,
  io_failure,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_grid: return "invalid-grid";
    case ErrorCode::invalid_extent: return "invalid-extent";
    case ErrorCode::cutoff_clipped: return "cutoff-clipped";
    case ErrorCode::invalid_system: return "invalid-system";
    case ErrorCode::resource_limit: return "resource-limit";
    case ErrorCode::invalid_decomposition: return "invalid-decomposition";
    case ErrorCode::convergence_failure: return "convergence-failure";
    case ErrorCode::invalid_basis: return "invalid-basis";
    case ErrorCode::screening_inapplicable: return "screening-inapplicable";
    case ErrorCode::dependency_missing: return "dependency-missing";
    case ErrorCode::invalid_induced_type: return "invalid-induced-type";
    case ErrorCode::support_overlap: return "support-overlap";
    case ErrorCode::geometry: return "geometry";
    case ErrorCode::not_invertible: return "not-invertible";
    case ErrorCode::window_exit: return "window-exit";
    case ErrorCode::deflation_failure: return "deflation";
    case ErrorCode::resolution: return "resolution";
    case ErrorCode::expansion_domain: return "expansion-domain";
    case ErrorCode::boost_too_large: return "boost-too-large";
    case ErrorCode::window: return "window";
    case ErrorCode::rigging: return "rigging";
    case ErrorCode::degenerate_state: return "degenerate-state";
    case ErrorCode::validation: return "validation";
    case ErrorCode::io_failure: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        m_code(code) {}

  ErrorCode code() const { return m_code; }

 private:
  ErrorCode m_code;
};

}  // namespace vdwlab
