#pragma once

#include <stdexcept>
#include <string>

namespace storyweaver {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

#define STORYWEAVER_ERROR(Name)              \
    class Name : public Error {              \
      public:                                \
        using Error::Error;                  \
    }

STORYWEAVER_ERROR(InvalidArgument);
STORYWEAVER_ERROR(ConfigError);
STORYWEAVER_ERROR(IoError);

// topic subsystem
STORYWEAVER_ERROR(EmptyTopic);
STORYWEAVER_ERROR(OfflineMiss);
STORYWEAVER_ERROR(FetchFailed);

// selector
STORYWEAVER_ERROR(CorpusEmpty);
STORYWEAVER_ERROR(SubsystemUnavailable);

// engine
STORYWEAVER_ERROR(UnknownSession);
STORYWEAVER_ERROR(EmptyMessage);
STORYWEAVER_ERROR(NoTurnsYet);

#undef STORYWEAVER_ERROR

}  // namespace storyweaver
