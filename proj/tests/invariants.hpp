#pragma once

#include <string>
#include <vector>

#include "celllab/scheduler.hpp"

namespace celllab::testing {

struct LogLimits {
  int cycling_channels = 48;
  double min_rest_s = 1800.0;
};

/// Checks a finished event log from its records alone. Returns one message
/// per violation; empty means every property held.
std::vector<std::string> check_event_log(const sched::EventLog& log, const LogLimits& limits);

}  // namespace celllab::testing
