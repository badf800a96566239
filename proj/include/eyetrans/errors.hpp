#pragma once

#include <stdexcept>
#include <string>

namespace eyetrans {

// All library failures derive from Error so callers can catch one type and
// still dispatch on the concrete condition.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define EYETRANS_DEFINE_ERROR(Name)          \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

EYETRANS_DEFINE_ERROR(ValidationError);
EYETRANS_DEFINE_ERROR(DanglingEndpoint);
EYETRANS_DEFINE_ERROR(EmptyStream);
EYETRANS_DEFINE_ERROR(NoEligibleNodes);
EYETRANS_DEFINE_ERROR(UnknownEndpoint);
EYETRANS_DEFINE_ERROR(ShapeMismatch);
EYETRANS_DEFINE_ERROR(LengthMismatch);
EYETRANS_DEFINE_ERROR(EmptyDataset);
EYETRANS_DEFINE_ERROR(LabelOutOfRange);
EYETRANS_DEFINE_ERROR(EmptyTier);
EYETRANS_DEFINE_ERROR(MissingDataset);
EYETRANS_DEFINE_ERROR(ConfigError);
EYETRANS_DEFINE_ERROR(SampleTooLong);
EYETRANS_DEFINE_ERROR(FormatError);

#undef EYETRANS_DEFINE_ERROR

// Size caps are a structural invariant, so TooLarge is a ValidationError.
class TooLarge : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, int line, int column)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace eyetrans
