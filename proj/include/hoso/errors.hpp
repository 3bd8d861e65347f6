#pragma once

#include <stdexcept>
#include <string>

namespace hoso {

// Root of every error the engine raises. The CLI maps these onto a nonzero
// exit code with the message as the diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define HOSO_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                     \
   public:                                                        \
    using Error::Error;                                           \
    const char* kind() const noexcept override { return #Name; } \
  };

HOSO_DEFINE_ERROR(FormatError)
HOSO_DEFINE_ERROR(DataError)
HOSO_DEFINE_ERROR(IoError)
HOSO_DEFINE_ERROR(ConfigError)
HOSO_DEFINE_ERROR(InsufficientShotsError)
HOSO_DEFINE_ERROR(ShapeError)
HOSO_DEFINE_ERROR(DegenerateVectorError)
HOSO_DEFINE_ERROR(LabelError)
HOSO_DEFINE_ERROR(NumericsError)
HOSO_DEFINE_ERROR(TapeError)

#undef HOSO_DEFINE_ERROR

}  // namespace hoso
