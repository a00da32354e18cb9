#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rlep/common.hpp"
#include "rlep/policy.hpp"
#include "rlep/run_log.hpp"
#include "rlep/tasks.hpp"

namespace rlep {

struct EvalReport {
  double pass1 = 0.0;  // greedy accuracy
  double avg_n = 0.0;  // mean accuracy over n samples
  double maj_n = 0.0;  // majority-vote accuracy
  int n = 0;
  long step = 0;
};

// Canonical form for vote counting: the response truncated at (and
// including) its first END. Responses without END stay as-is; they never
// verify but can still win the vote.
TokenSeq canonicalize_response(const TokenSeq& response, TokenId end_token);

// Modal canonical response. Ties on the modal count are broken by the
// lexicographically smallest token sequence.
TokenSeq majority_response(const std::vector<TokenSeq>& canonicalized);

// pass1 via greedy decoding; avg_n / maj_n over n_samples sampled responses
// per task.
EvalReport evaluate(const PolicyParams& params, const TaskSet& tasks,
                    int n_samples, double temperature, double top_p,
                    std::uint64_t seed, int max_response_len,
                    int workers = 1);

// Smallest step whose metric value is >= threshold; rows without the metric
// are skipped. nullopt if the threshold is never reached.
std::optional<long> steps_to_threshold(const RunLog& log,
                                       const std::string& metric,
                                       double threshold);

struct RunComparison {
  std::string metric;
  double baseline_peak = 0.0;
  double rlep_peak = 0.0;
  double baseline_final = 0.0;
  double rlep_final = 0.0;
  std::optional<long> baseline_steps_to_own_peak;
  std::optional<long> rlep_steps_to_baseline_peak;
  // baseline_steps_to_own_peak / rlep_steps_to_baseline_peak when both exist
  std::optional<double> speedup;
};

RunComparison compare_runs(const RunLog& baseline, const RunLog& rlep,
                           const std::string& metric = "eval_pass1");

void save_comparison_csv(const RunComparison& c, const std::string& path);

}  // namespace rlep
