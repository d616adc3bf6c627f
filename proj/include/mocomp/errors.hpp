#pragma once

#include <stdexcept>
#include <string>

namespace mocomp {

// Base for every error raised by the library. Each subclass corresponds to a
// named failure of one operation so callers can catch exactly what they handle.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MOCOMP_DEFINE_ERROR(Name)    \
  class Name : public Error {        \
   public:                           \
    using Error::Error;              \
  }

// protocol
MOCOMP_DEFINE_ERROR(MalformedFrame);
MOCOMP_DEFINE_ERROR(InvalidCommand);
MOCOMP_DEFINE_ERROR(InvalidSample);
MOCOMP_DEFINE_ERROR(InvalidEvent);

// planner
MOCOMP_DEFINE_ERROR(UnknownMode);
MOCOMP_DEFINE_ERROR(RegistryLoadError);
MOCOMP_DEFINE_ERROR(WindowTooShort);

// bridge
MOCOMP_DEFINE_ERROR(IgnoredDuringRecipe);
MOCOMP_DEFINE_ERROR(InvalidRecipe);
MOCOMP_DEFINE_ERROR(BackendUnavailable);

// annotation
MOCOMP_DEFINE_ERROR(NoTempoBank);
MOCOMP_DEFINE_ERROR(EmptyTrajectory);
MOCOMP_DEFINE_ERROR(BankLoadError);

// dataset
MOCOMP_DEFINE_ERROR(IoError);
MOCOMP_DEFINE_ERROR(ParseError);

// service
MOCOMP_DEFINE_ERROR(PortInUse);

#undef MOCOMP_DEFINE_ERROR

}  // namespace mocomp
