#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rlep/common.hpp"

namespace rlep {

// One row per optimizer update. Eval columns are present only on steps where
// the held-out split was evaluated.
struct RunLogRow {
  long step = 0;
  double objective = 0.0;
  double clip_fraction = 0.0;
  double train_reward_mean = 0.0;
  std::optional<double> eval_pass1;
  std::optional<double> eval_majn;
};

struct RunLog {
  std::vector<RunLogRow> rows;

  // Column accessor by CSV name; raises "config" for unknown columns.
  static std::optional<double> metric(const RunLogRow& row,
                                      const std::string& name);
  static void check_metric_name(const std::string& name);
};

inline constexpr const char* kRunLogHeader =
    "step,objective,clip_fraction,train_reward_mean,eval_pass1,eval_majN";

// Append-only CSV with a fixed header. Floats are written with %.17g so
// reloading preserves the exact doubles.
void save_run_log(const RunLog& log, const std::string& path);
RunLog load_run_log(const std::string& path);

std::string format_double(double v);

}  // namespace rlep
