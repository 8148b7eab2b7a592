#pragma once

#include <ostream>

namespace sentinel::cli {

/// Exit codes of the `sentinel` tool.
enum Exit : int {
  kFalseAlarm = 0,  ///< also plain success for non-classify commands
  kTrueAlarm = 1,
  kError = 2,
  kInsufficientCleanBeats = 3,
  kLatencyExceeded = 4,
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sentinel::cli
