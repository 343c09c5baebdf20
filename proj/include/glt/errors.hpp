#pragma once

#include <stdexcept>
#include <string>

namespace glt {

// Coarse grouping used by the CLI to pick an exit code.
enum class ErrorCategory { Config, Initialization, Geometry, Data, Internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define GLT_DEFINE_ERROR(Name, Category)                                         \
  class Name : public Error {                                                    \
   public:                                                                       \
    explicit Name(const std::string& what) : Error(ErrorCategory::Category, what) {} \
  }

GLT_DEFINE_ERROR(DegenerateInput, Geometry);
GLT_DEFINE_ERROR(GeometryFailure, Geometry);
GLT_DEFINE_ERROR(UnknownId, Internal);
GLT_DEFINE_ERROR(NonPositiveVolume, Data);
GLT_DEFINE_ERROR(EmptyBreaks, Data);
GLT_DEFINE_ERROR(BinMismatch, Data);
GLT_DEFINE_ERROR(EmptyHistogram, Data);
GLT_DEFINE_ERROR(InsufficientData, Data);
GLT_DEFINE_ERROR(InvalidParameter, Config);
GLT_DEFINE_ERROR(ConfigError, Config);
GLT_DEFINE_ERROR(DatasetError, Data);
GLT_DEFINE_ERROR(RadiusExceedsR0, Data);
GLT_DEFINE_ERROR(InitializationFailure, Initialization);
GLT_DEFINE_ERROR(RejectionBudgetExhausted, Initialization);

#undef GLT_DEFINE_ERROR

}  // namespace glt
