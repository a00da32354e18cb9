#include "rlep/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace rlep {

TokenSeq canonicalize_response(const TokenSeq& response, TokenId end_token) {
  auto it = std::find(response.begin(), response.end(), end_token);
  if (it == response.end()) return response;
  return TokenSeq(response.begin(), it + 1);
}

TokenSeq majority_response(const std::vector<TokenSeq>& canonicalized) {
  if (canonicalized.empty())
    fail("invalid-params", "majority_response: no votes");
  std::map<TokenSeq, int> counts;
  for (const TokenSeq& c : canonicalized) ++counts[c];
  const TokenSeq* best = nullptr;
  int best_count = 0;
  // std::map iterates in lexicographic order, so the first max wins ties.
  for (const auto& [seq, count] : counts) {
    if (count > best_count) {
      best = &seq;
      best_count = count;
    }
  }
  return *best;
}

EvalReport evaluate(const PolicyParams& params, const TaskSet& tasks,
                    int n_samples, double temperature, double top_p,
                    std::uint64_t seed, int max_response_len, int workers) {
  if (tasks.tasks.empty()) fail("config", "evaluate: empty taskset");
  if (n_samples < 1) fail("config", "evaluate: n_samples must be >= 1");

  const std::size_t n_tasks = tasks.tasks.size();
  const TokenId end = params.vocab.end_token();
  std::vector<double> pass1(n_tasks, 0.0), avg(n_tasks, 0.0), maj(n_tasks, 0.0);

  parallel_for(n_tasks, workers, [&](std::size_t ti) {
    const Task& task = tasks.tasks[ti];
    pass1[ti] = verify(task, greedy_decode(params, task.prompt,
                                           max_response_len));
    Rng rng = make_rng(seed, "eval-task", ti);
    std::vector<TokenSeq> votes;
    votes.reserve(n_samples);
    double correct = 0.0;
    for (int s = 0; s < n_samples; ++s) {
      SampledSequence seq = sample(params, task.prompt, max_response_len,
                                   temperature, top_p, rng);
      correct += verify(task, seq.tokens);
      votes.push_back(canonicalize_response(seq.tokens, end));
    }
    avg[ti] = correct / n_samples;
    maj[ti] = verify(task, majority_response(votes));
  });

  EvalReport rep;
  rep.n = n_samples;
  for (std::size_t i = 0; i < n_tasks; ++i) {
    rep.pass1 += pass1[i];
    rep.avg_n += avg[i];
    rep.maj_n += maj[i];
  }
  rep.pass1 /= static_cast<double>(n_tasks);
  rep.avg_n /= static_cast<double>(n_tasks);
  rep.maj_n /= static_cast<double>(n_tasks);
  return rep;
}

std::optional<long> steps_to_threshold(const RunLog& log,
                                       const std::string& metric,
                                       double threshold) {
  if (log.rows.empty()) fail("config", "steps_to_threshold: empty log");
  RunLog::check_metric_name(metric);
  for (const RunLogRow& row : log.rows) {
    std::optional<double> v = RunLog::metric(row, metric);
    if (v && *v >= threshold) return row.step;
  }
  return std::nullopt;
}

namespace {

struct MetricSummary {
  double peak = 0.0;
  long peak_step = 0;
  double final_value = 0.0;
  bool any = false;
};

MetricSummary summarize(const RunLog& log, const std::string& metric) {
  MetricSummary s;
  for (const RunLogRow& row : log.rows) {
    std::optional<double> v = RunLog::metric(row, metric);
    if (!v) continue;
    if (!s.any || *v > s.peak) {
      s.peak = *v;
      s.peak_step = row.step;
    }
    s.final_value = *v;
    s.any = true;
  }
  return s;
}

}  // namespace

RunComparison compare_runs(const RunLog& baseline, const RunLog& rlep,
                           const std::string& metric) {
  RunLog::check_metric_name(metric);
  MetricSummary b = summarize(baseline, metric);
  MetricSummary r = summarize(rlep, metric);
  if (!b.any || !r.any)
    fail("schema", "compare_runs: no '" + metric + "' values in log");

  RunComparison c;
  c.metric = metric;
  c.baseline_peak = b.peak;
  c.rlep_peak = r.peak;
  c.baseline_final = b.final_value;
  c.rlep_final = r.final_value;
  // First step at which each run reaches the baseline's peak level.
  c.baseline_steps_to_own_peak =
      steps_to_threshold(baseline, metric, b.peak);
  c.rlep_steps_to_baseline_peak = steps_to_threshold(rlep, metric, b.peak);
  if (c.baseline_steps_to_own_peak && c.rlep_steps_to_baseline_peak &&
      *c.rlep_steps_to_baseline_peak > 0) {
    c.speedup = static_cast<double>(*c.baseline_steps_to_own_peak) /
                static_cast<double>(*c.rlep_steps_to_baseline_peak);
  }
  return c;
}

void save_comparison_csv(const RunComparison& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot open for writing: " + path);
  out << "metric,baseline_peak,rlep_peak,baseline_final,rlep_final,"
         "baseline_steps_to_own_peak,rlep_steps_to_baseline_peak,speedup\n";
  out << c.metric << ',' << format_double(c.baseline_peak) << ','
      << format_double(c.rlep_peak) << ',' << format_double(c.baseline_final)
      << ',' << format_double(c.rlep_final) << ',';
  if (c.baseline_steps_to_own_peak) out << *c.baseline_steps_to_own_peak;
  out << ',';
  if (c.rlep_steps_to_baseline_peak) out << *c.rlep_steps_to_baseline_peak;
  out << ',';
  if (c.speedup) out << format_double(*c.speedup);
  out << '\n';
  if (!out) fail("io", "write failed: " + path);
}

}  // namespace rlep
