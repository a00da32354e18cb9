#include <doctest.h>

#include <cmath>

#include "rlep/eval.hpp"

using namespace rlep;

namespace {

// Copy tasks with a single-token payload: under a 2-token context window the
// forced answer paths of distinct tasks never share a context row, so a
// canonical-answer policy is exactly representable.
TaskSet eval_tasks(int count = 10) {
  TaskGenOptions opts;
  opts.payload_len = 1;
  return generate_taskset(TaskFamily::Copy, count, 21, Vocab{16}, Split::eval,
                          opts);
}

void force_answer(PolicyParams& params, const Task& task, double logit = 40.0) {
  for (std::size_t t = 0; t < task.answer.size(); ++t) {
    std::int64_t row = params.context_row(task.prompt, task.answer, t);
    params.row(row)[task.answer[t]] = logit;
  }
}

RunLog synthetic_log(const std::vector<double>& pass1_values, int stride = 10) {
  RunLog log;
  for (std::size_t i = 0; i < pass1_values.size(); ++i) {
    RunLogRow row;
    row.step = static_cast<long>((i + 1) * stride);
    row.objective = 0.1;
    row.eval_pass1 = pass1_values[i];
    row.eval_majn = pass1_values[i];
    log.rows.push_back(row);
  }
  return log;
}

}  // namespace

TEST_CASE("canonicalize_response truncates at the first END") {
  const TokenId end = 15;
  CHECK(canonicalize_response({3, 15, 7, 8}, end) == TokenSeq{3, 15});
  CHECK(canonicalize_response({3, 15}, end) == TokenSeq{3, 15});
  CHECK(canonicalize_response({3, 7}, end) == TokenSeq{3, 7});
  CHECK(canonicalize_response({15}, end) == TokenSeq{15});
}

TEST_CASE("majority_response: modal answer, lexicographic tie-break") {
  // Votes {a,a,b,c,c} with a=[1,15], b=[2,15], c=[0,15]: the modal set is
  // {a,c}; the lexicographically smaller c=[0,15] wins.
  std::vector<TokenSeq> votes = {{1, 15}, {1, 15}, {2, 15}, {0, 15}, {0, 15}};
  CHECK(majority_response(votes) == TokenSeq{0, 15});

  // Unanimous votes return the unanimous answer.
  std::vector<TokenSeq> unanimous = {{4, 15}, {4, 15}, {4, 15}};
  CHECK(majority_response(unanimous) == TokenSeq{4, 15});

  // Clear majority beats lexicographic order.
  std::vector<TokenSeq> clear = {{9, 15}, {9, 15}, {0, 15}};
  CHECK(majority_response(clear) == TokenSeq{9, 15});
}

TEST_CASE("evaluate: canonical-answer policy scores 1.0 everywhere") {
  TaskSet tasks = eval_tasks();
  PolicyParams params = PolicyParams::zeros(tasks.vocab(), 2);
  for (const Task& t : tasks.tasks) force_answer(params, t);

  EvalReport rep = evaluate(params, tasks, 8, 1.0, 1.0, 3, 8);
  CHECK(rep.pass1 == doctest::Approx(1.0));
  CHECK(rep.avg_n == doctest::Approx(1.0));
  CHECK(rep.maj_n == doctest::Approx(1.0));
}

TEST_CASE("evaluate: n_samples=1 makes avgN equal majN") {
  TaskSet tasks = eval_tasks();
  PolicyParams params = PolicyParams::zeros(tasks.vocab(), 2);
  // Half-forced policy: some tasks solvable, some not.
  for (std::size_t i = 0; i < tasks.tasks.size(); i += 2)
    force_answer(params, tasks.tasks[i]);
  EvalReport rep = evaluate(params, tasks, 1, 1.0, 1.0, 5, 8);
  CHECK(rep.avg_n == doctest::Approx(rep.maj_n).epsilon(1e-15));
}

TEST_CASE("evaluate: deterministic given the seed and worker count") {
  TaskSet tasks = eval_tasks();
  PolicyParams params = PolicyParams::zeros(tasks.vocab(), 2);
  EvalReport a = evaluate(params, tasks, 6, 1.0, 1.0, 9, 8, 1);
  EvalReport b = evaluate(params, tasks, 6, 1.0, 1.0, 9, 8, 4);
  CHECK(a.pass1 == b.pass1);
  CHECK(a.avg_n == b.avg_n);
  CHECK(a.maj_n == b.maj_n);
}

TEST_CASE("steps_to_threshold: first crossing, monotone in threshold") {
  RunLog log = synthetic_log({0.1, 0.3, 0.25, 0.5, 0.45, 0.5});

  SUBCASE("monotone crossing") {
    auto s = steps_to_threshold(log, "eval_pass1", 0.3);
    REQUIRE(s.has_value());
    CHECK(*s == 20);
  }
  SUBCASE("threshold above the maximum yields nothing") {
    CHECK_FALSE(steps_to_threshold(log, "eval_pass1", 0.6).has_value());
  }
  SUBCASE("noisy log: the first crossing is returned, not a sustained one") {
    auto s = steps_to_threshold(log, "eval_pass1", 0.29);
    REQUIRE(s.has_value());
    CHECK(*s == 20);  // dips to 0.25 afterwards; still the first crossing
  }
  SUBCASE("higher thresholds never return earlier steps") {
    long prev = 0;
    for (double th : {0.05, 0.1, 0.25, 0.3, 0.45, 0.5}) {
      auto s = steps_to_threshold(log, "eval_pass1", th);
      REQUIRE(s.has_value());
      CHECK(*s >= prev);
      prev = *s;
    }
  }
  SUBCASE("unknown metric raises a config error") {
    CHECK_THROWS_AS(steps_to_threshold(log, "no_such_metric", 0.5), Error);
  }
}

TEST_CASE("compare_runs: identical logs give speedup 1.0") {
  RunLog log = synthetic_log({0.1, 0.2, 0.4, 0.4});
  RunComparison c = compare_runs(log, log);
  CHECK(c.baseline_peak == doctest::Approx(0.4));
  CHECK(c.rlep_peak == doctest::Approx(0.4));
  CHECK(c.baseline_final == doctest::Approx(0.4));
  CHECK(c.rlep_final == doctest::Approx(0.4));
  REQUIRE(c.speedup.has_value());
  CHECK(*c.speedup == doctest::Approx(1.0));
}

TEST_CASE("compare_runs: crossing at half the steps doubles the speedup") {
  RunLog baseline = synthetic_log({0.1, 0.2, 0.3, 0.4});  // peak at step 40
  RunLog rlep = synthetic_log({0.2, 0.4, 0.4, 0.4});      // crosses at step 20
  RunComparison c = compare_runs(baseline, rlep);
  REQUIRE(c.baseline_steps_to_own_peak.has_value());
  REQUIRE(c.rlep_steps_to_baseline_peak.has_value());
  CHECK(*c.baseline_steps_to_own_peak == 40);
  CHECK(*c.rlep_steps_to_baseline_peak == 20);
  REQUIRE(c.speedup.has_value());
  CHECK(*c.speedup == doctest::Approx(2.0));
}

TEST_CASE("compare_runs: rlep never reaching the baseline peak") {
  RunLog baseline = synthetic_log({0.2, 0.5});
  RunLog rlep = synthetic_log({0.1, 0.3});
  RunComparison c = compare_runs(baseline, rlep);
  CHECK_FALSE(c.rlep_steps_to_baseline_peak.has_value());
  CHECK_FALSE(c.speedup.has_value());
}
