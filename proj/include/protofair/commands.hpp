#pragma once

#include <iosfwd>

#include "protofair/run_config.hpp"

namespace protofair {

// Subcommand bodies, exception-based: callers map ConfigError/DataError/
// NumericError to exit codes 1/2/3. `out` receives the human-readable
// summaries; artifacts land in cfg.out_dir.

void cmd_prepare(const RunConfig& cfg, std::ostream& out);
void cmd_synth(const RunConfig& cfg, std::ostream& out);
void cmd_train(const RunConfig& cfg, std::ostream& out);
void cmd_evaluate(const RunConfig& cfg, std::ostream& out);
void cmd_explain(const RunConfig& cfg, std::ostream& out);

}  // namespace protofair
