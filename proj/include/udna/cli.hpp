#pragma once

#include <string>
#include <vector>

#include "udna/config.hpp"

namespace udna {

// The three front-end verbs. Each returns a process exit code: 0 on
// success, 1 on configuration, file, or schema errors (message on stderr
// names the offending field), and for cmd_run 2 when the run diverged
// (outputs are still written). Relative output paths land under out_dir,
// which is created if missing.
int cmd_run(const std::string& config_path, const std::string& out_dir);

// Runs every preset (entries "name" or "name:power") on the shared problem
// and graph of the base config, then writes compare.csv (long format:
// preset, t, volume, opt_err) and ranking.csv ordered by communication
// volume needed to push the optimality error below threshold. Members that
// never reach it, diverge, or fail to configure rank behind every member
// that does; equal volumes share a rank.
int cmd_compare(const std::string& config_path,
                const std::vector<std::string>& presets, double threshold,
                const std::string& out_dir);

// Post-processes a recorded trace against its config: witness constants
// and inequality margins, per-iteration descent margins, and a tail rate
// fit of the optimality error. Writes diag.json and margins.csv (the trace
// columns with the margin columns appended). The trace must have been
// recorded at every iteration.
int cmd_diag(const std::string& trace_path, const std::string& config_path,
             const std::string& out_dir);

}  // namespace udna
