#pragma once

#include <stdexcept>
#include <string>

namespace edstream {

enum class Errc {
  CycleDetected,
  TooLong,
  UndefinedSymbol,
  OutOfRange,
  BadRange,
  BadParams,
  TooBig,
  Malformed,
  TagMismatch,
  PhaseError,
  StalenessError,
  BudgetExceeded,
  StreamTooLong,
  DeterminismViolation,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::TooLong: return "TooLong";
    case Errc::UndefinedSymbol: return "UndefinedSymbol";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::BadRange: return "BadRange";
    case Errc::BadParams: return "BadParams";
    case Errc::TooBig: return "TooBig";
    case Errc::Malformed: return "Malformed";
    case Errc::TagMismatch: return "TagMismatch";
    case Errc::PhaseError: return "PhaseError";
    case Errc::StalenessError: return "StalenessError";
    case Errc::BudgetExceeded: return "BudgetExceeded";
    case Errc::StreamTooLong: return "StreamTooLong";
    case Errc::DeterminismViolation: return "DeterminismViolation";
  }
  return "Unknown";
}

// Single exception type; the code() distinguishes contract violations so tests
// can assert on them without a class per failure mode.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace edstream
