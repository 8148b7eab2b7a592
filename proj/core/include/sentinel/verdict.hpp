#pragma once

#include <string>
#include <vector>

#include "sentinel/record_io.hpp"

namespace sentinel {

/// A named number backing a test outcome (heart rate, gap length, ...).
struct Witness {
  std::string name;
  double value = 0.0;
};

struct ChannelEvidence {
  std::string channel;
  std::string test;
  bool positive = false;
  std::vector<Witness> witnesses;
};

struct Verdict {
  Truth decision = Truth::TrueAlarm;
  bool gate_fired = false;  ///< regular activity dismissed the alarm
  std::string method;
  Arrhythmia arrhythmia = Arrhythmia::Asystole;
  std::vector<ChannelEvidence> evidence;
  std::vector<std::string> notes;
};

}  // namespace sentinel
