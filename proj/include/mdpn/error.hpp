#pragma once

#include <stdexcept>
#include <string>

namespace mdpn {

enum class ErrorCode {
  Syntax,
  Undeclared,
  DuplicateRule,
  Disjoint,
  NotEnabled,
  Replay,
  HasCut,
  NotCutWellformed,
  Alphabet,
  Arity,
  StackEmptyable,
  Unschedulable,
  Io,
  Cancelled,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Syntax: return "ERR_SYNTAX";
    case ErrorCode::Undeclared: return "ERR_UNDECLARED";
    case ErrorCode::DuplicateRule: return "ERR_DUP_RULE";
    case ErrorCode::Disjoint: return "ERR_DISJOINT";
    case ErrorCode::NotEnabled: return "ERR_NOT_ENABLED";
    case ErrorCode::Replay: return "ERR_REPLAY";
    case ErrorCode::HasCut: return "ERR_HAS_CUT";
    case ErrorCode::NotCutWellformed: return "ERR_NOT_CWF";
    case ErrorCode::Alphabet: return "ERR_ALPHABET";
    case ErrorCode::Arity: return "ERR_ARITY";
    case ErrorCode::StackEmptyable: return "ERR_STACK_EMPTYABLE";
    case ErrorCode::Unschedulable: return "ERR_UNSCHEDULABLE";
    case ErrorCode::Io: return "ERR_IO";
    case ErrorCode::Cancelled: return "ERR_CANCELLED";
  }
  return "ERR_UNKNOWN";
}

/// Every failure in the library is reported as an Error carrying a stable code.
/// Parse errors additionally carry a 1-based line and column (0 when unknown).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, int line = 0, int column = 0)
      : std::runtime_error(format(code, message, line, column)),
        code_(code),
        line_(line),
        column_(column) {}

  ErrorCode code() const noexcept { return code_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  static std::string format(ErrorCode code, const std::string& message, int line, int column) {
    std::string out = error_code_name(code);
    if (line > 0) {
      out += " at " + std::to_string(line) + ":" + std::to_string(column);
    }
    out += ": " + message;
    return out;
  }

  ErrorCode code_;
  int line_;
  int column_;
};

}  // namespace mdpn
