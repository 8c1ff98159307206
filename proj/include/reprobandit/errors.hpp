#ifndef REPROBANDIT_ERRORS_HPP
#define REPROBANDIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace reprobandit {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define REPROBANDIT_DEFINE_ERROR(Name)          \
  class Name : public Error {                   \
   public:                                      \
    using Error::Error;                         \
  }

REPROBANDIT_DEFINE_ERROR(InvalidArgument);
REPROBANDIT_DEFINE_ERROR(InvalidArm);
REPROBANDIT_DEFINE_ERROR(InvalidAction);
REPROBANDIT_DEFINE_ERROR(InvalidRegime);
REPROBANDIT_DEFINE_ERROR(InsufficientSamples);
REPROBANDIT_DEFINE_ERROR(OutOfRange);
REPROBANDIT_DEFINE_ERROR(HorizonTooSmall);
REPROBANDIT_DEFINE_ERROR(DegenerateArmSet);
REPROBANDIT_DEFINE_ERROR(SingularDesign);
REPROBANDIT_DEFINE_ERROR(NetTooLarge);
REPROBANDIT_DEFINE_ERROR(ConfigError);

#undef REPROBANDIT_DEFINE_ERROR

}  // namespace reprobandit

#endif
