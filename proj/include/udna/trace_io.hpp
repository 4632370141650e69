#pragma once

#include <string>
#include <vector>

#include "udna/engine.hpp"

namespace udna {

// Version stamp of the trace file layout, written as a leading comment
// line. Readers refuse any other version.
inline constexpr const char* kTraceSchemaVersion = "1";

// Column order of the CSV: t,F,consensus_sq,tracking_sq,v_sq,P,opt_err,
// eps_stat,volume,dx,gbar_norm. dx is the step length taken from the row's
// iterate (empty-free: NaN prints as nan). Doubles use %.17g so a write and
// re-read round-trips bitwise.
void write_trace_csv(const std::string& path,
                     const std::vector<TraceRow>& trace);

// Throws std::runtime_error naming the file and the offending line, column,
// or version stamp.
std::vector<TraceRow> read_trace_csv(const std::string& path);

}  // namespace udna
