#pragma once

#include <stdexcept>
#include <string>

namespace cmc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CMC_DEFINE_ERROR(Name)                 \
  class Name : public Error {                  \
   public:                                     \
    explicit Name(const std::string& what)     \
        : Error(#Name ": " + what) {}          \
  }

CMC_DEFINE_ERROR(NonConvergence);
CMC_DEFINE_ERROR(DegenerateGradient);
CMC_DEFINE_ERROR(BoundaryOffDomain);
CMC_DEFINE_ERROR(ChartTooLarge);
CMC_DEFINE_ERROR(PoleInput);
CMC_DEFINE_ERROR(ReducibleFraction);
CMC_DEFINE_ERROR(FitDiverged);
CMC_DEFINE_ERROR(BelowThreshold);
CMC_DEFINE_ERROR(BudgetExceeded);
CMC_DEFINE_ERROR(SingularSystem);
CMC_DEFINE_ERROR(BoundaryMismatch);
CMC_DEFINE_ERROR(FormatError);
CMC_DEFINE_ERROR(InvalidArgument);

#undef CMC_DEFINE_ERROR

}  // namespace cmc
