#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "rlep/trainer.hpp"

using namespace rlep;

namespace {

TaskSet small_tasks(Split split, int count = 12) {
  TaskGenOptions opts;
  opts.modulus = 6;
  return generate_taskset(TaskFamily::ModAdd, count, 5, Vocab{16}, split,
                          opts);
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.g = 4;
  cfg.m = 0;
  cfg.prompts_per_rollout = 4;
  cfg.mini_batch_prompts = 2;
  cfg.total_steps = 6;
  cfg.max_response_len = 6;
  cfg.learning_rate = 0.05;
  cfg.eval_every = 3;
  cfg.eval_samples = 4;
  cfg.context_len = 2;
  cfg.seed = 11;
  return cfg;
}

ExperiencePool canonical_pool(const TaskSet& tasks, int min_paths = 1) {
  ExperiencePool pool;
  pool.min_paths = min_paths;
  for (const Task& task : tasks.tasks) {
    ExperienceRecord rec;
    rec.question_id = task.id;
    rec.response_tokens = task.answer;
    rec.reward = 1.0;
    rec.source_checkpoint = "canonical";
    rec.collection_step = 0;
    pool.by_question[task.id].push_back(std::move(rec));
  }
  return pool;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("rollout_phase: G trajectories per question with exact old_logprob") {
  TaskSet tasks = small_tasks(Split::train);
  TrainConfig cfg = tiny_config();
  cfg.g = 16;
  PolicyParams params = PolicyParams::zeros(tasks.vocab(), 2);

  std::vector<const Task*> questions;
  for (int i = 0; i < 4; ++i) questions.push_back(&tasks.tasks[i]);

  auto fresh = rollout_phase(params, questions, cfg, 99);
  REQUIRE(fresh.size() == 4);
  for (std::size_t qi = 0; qi < fresh.size(); ++qi) {
    CHECK(fresh[qi].size() == 16);
    for (const Trajectory& t : fresh[qi]) {
      CHECK(t.source == TrajectorySource::fresh);
      // Recorded behavior log-probs re-evaluate exactly under the rollout
      // policy.
      auto lp = logprob(params, questions[qi]->prompt, t.tokens);
      REQUIRE(lp.size() == t.old_logprob.size());
      for (std::size_t k = 0; k < lp.size(); ++k)
        CHECK(std::abs(lp[k] - t.old_logprob[k]) < 1e-12);
      CHECK((t.reward == 0.0 || t.reward == 1.0));
    }
  }

  auto again = rollout_phase(params, questions, cfg, 99);
  for (std::size_t qi = 0; qi < fresh.size(); ++qi)
    for (std::size_t k = 0; k < fresh[qi].size(); ++k)
      CHECK(fresh[qi][k].tokens == again[qi][k].tokens);

  auto parallel = rollout_phase(params, questions, cfg, 99, 3);
  for (std::size_t qi = 0; qi < fresh.size(); ++qi)
    for (std::size_t k = 0; k < fresh[qi].size(); ++k)
      CHECK(fresh[qi][k].tokens == parallel[qi][k].tokens);
}

TEST_CASE("assemble_groups: G'=G+M with replays marked and advantages exact") {
  TaskSet tasks = small_tasks(Split::train);
  TrainConfig cfg = tiny_config();
  cfg.g = 16;
  cfg.m = 2;
  PolicyParams params = PolicyParams::zeros(tasks.vocab(), 2);
  ExperiencePool pool = canonical_pool(tasks);

  std::vector<const Task*> questions = {&tasks.tasks[0], &tasks.tasks[1]};

  // Force all fresh rollouts wrong: empty-ish policy samples rarely solve
  // ModAdd, but make it deterministic by overwriting rewards below.
  auto fresh = rollout_phase(params, questions, cfg, 123);
  for (auto& list : fresh)
    for (auto& t : list) t.reward = 0.0;

  auto groups = assemble_groups(questions, std::move(fresh), &pool, params,
                                nullptr, cfg, 7);
  REQUIRE(groups.size() == 2);
  for (const Group& g : groups) {
    REQUIRE(g.trajectories.size() == 18);
    int replayed = 0;
    for (const Trajectory& t : g.trajectories)
      if (t.source == TrajectorySource::replayed) {
        ++replayed;
        CHECK(t.reward == 1.0);
      }
    CHECK(replayed == 2);

    // 16 zeros + 2 ones: mean 1/9, population std (2*sqrt(2))/9.
    const double adv_pos = 2.0 * std::sqrt(2.0);
    const double adv_neg = -1.0 / (2.0 * std::sqrt(2.0));
    for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
      double expect = g.trajectories[i].source == TrajectorySource::replayed
                          ? adv_pos
                          : adv_neg;
      CHECK(g.advantages[i] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("assemble_groups: M=0 leaves vanilla groups untouched") {
  TaskSet tasks = small_tasks(Split::train);
  TrainConfig cfg = tiny_config();
  cfg.m = 0;
  PolicyParams params = PolicyParams::zeros(tasks.vocab(), 2);
  std::vector<const Task*> questions = {&tasks.tasks[0], &tasks.tasks[1]};

  auto fresh = rollout_phase(params, questions, cfg, 55);
  auto fresh_copy = fresh;
  auto groups = assemble_groups(questions, std::move(fresh), nullptr, params,
                                nullptr, cfg, 7);
  REQUIRE(groups.size() == 2);
  for (std::size_t qi = 0; qi < groups.size(); ++qi) {
    REQUIRE(groups[qi].trajectories.size() == fresh_copy[qi].size());
    for (std::size_t k = 0; k < fresh_copy[qi].size(); ++k)
      CHECK(groups[qi].trajectories[k].tokens == fresh_copy[qi][k].tokens);
  }
}

TEST_CASE("assemble_groups: missing-question policy") {
  TaskSet tasks = small_tasks(Split::train);
  TrainConfig cfg = tiny_config();
  cfg.g = 2;
  cfg.m = 1;
  PolicyParams params = PolicyParams::zeros(tasks.vocab(), 2);

  ExperiencePool pool = canonical_pool(tasks);
  pool.by_question.erase(tasks.tasks[0].id);  // half-covered pool

  std::vector<const Task*> questions = {&tasks.tasks[0], &tasks.tasks[1]};

  SUBCASE("skip_replay trains the uncovered question with G'=G") {
    cfg.replay_missing_policy = ReplayMissingPolicy::skip_replay;
    auto fresh = rollout_phase(params, questions, cfg, 5);
    auto groups = assemble_groups(questions, std::move(fresh), &pool, params,
                                  nullptr, cfg, 7);
    CHECK(groups[0].trajectories.size() == 2);  // no replay available
    CHECK(groups[1].trajectories.size() == 3);  // G + M
  }

  SUBCASE("error aborts") {
    cfg.replay_missing_policy = ReplayMissingPolicy::error;
    auto fresh = rollout_phase(params, questions, cfg, 5);
    try {
      assemble_groups(questions, std::move(fresh), &pool, params, nullptr,
                      cfg, 7);
      FAIL("expected missing-question error");
    } catch (const Error& e) {
      CHECK(e.category() == "missing-question");
    }
  }
}

TEST_CASE("update_phase: geometry and learning-rate zero") {
  TaskSet tasks = small_tasks(Split::train);
  TrainConfig cfg = tiny_config();
  cfg.prompts_per_rollout = 8;
  cfg.mini_batch_prompts = 1;
  CHECK(cfg.updates_per_rollout() == 8);

  PolicyParams params = PolicyParams::zeros(tasks.vocab(), 2);
  std::vector<const Task*> questions;
  for (int i = 0; i < 8; ++i) questions.push_back(&tasks.tasks[i]);
  auto fresh = rollout_phase(params, questions, cfg, 31);
  auto groups = assemble_groups(questions, std::move(fresh), nullptr, params,
                                nullptr, cfg, 7);

  SUBCASE("updates_per_rollout optimizer steps") {
    OptimizerState opt;
    Rng batch_rng(3);
    auto stats = update_phase(params, groups, cfg, opt, batch_rng);
    CHECK(stats.size() == 8);
  }

  SUBCASE("learning_rate 0 leaves params unchanged but logs the objective") {
    cfg.learning_rate = 0.0;
    PolicyParams before = params;
    OptimizerState opt;
    Rng batch_rng(3);
    auto stats = update_phase(params, groups, cfg, opt, batch_rng);
    CHECK(params.logits == before.logits);
    for (const UpdateStats& s : stats) CHECK(std::isfinite(s.objective));
  }
}

TEST_CASE("apply_update: single group SGD matches a hand-stepped oracle") {
  TaskSet tasks = small_tasks(Split::train);
  TrainConfig cfg = tiny_config();
  cfg.optimizer = Optimizer::sgd;
  cfg.learning_rate = 0.1;
  cfg.mini_batch_prompts = 1;
  cfg.prompts_per_rollout = 1;

  PolicyParams params = PolicyParams::zeros(tasks.vocab(), 2);
  Rng rng(8);
  for (double& v : params.logits) v = 0.5 * (2.0 * uniform01(rng) - 1.0);

  std::vector<const Task*> questions = {&tasks.tasks[2]};
  auto fresh = rollout_phase(params, questions, cfg, 77);
  // Ensure a non-degenerate group.
  fresh[0][0].reward = 1.0;
  fresh[0][1].reward = 0.0;
  auto groups = assemble_groups(questions, std::move(fresh), nullptr, params,
                                nullptr, cfg, 7);

  // Oracle: gradient of the group objective by central finite differences,
  // then one explicit ascent step.
  PolicyParams reference = params;
  const double h = 1e-6;
  std::vector<double> fd_grad(params.logits.size(), 0.0);
  for (std::size_t i = 0; i < params.logits.size(); ++i) {
    PolicyParams plus = params, minus = params;
    plus.logits[i] += h;
    minus.logits[i] -= h;
    double a = surrogate_objective(plus, groups[0], cfg.clip).objective;
    double b = surrogate_objective(minus, groups[0], cfg.clip).objective;
    fd_grad[i] = (a - b) / (2.0 * h);
  }
  for (std::size_t i = 0; i < reference.logits.size(); ++i)
    reference.logits[i] += cfg.learning_rate * fd_grad[i];

  OptimizerState opt;
  std::vector<const Group*> minibatch = {&groups[0]};
  apply_update(params, minibatch, cfg, opt);

  for (std::size_t i = 0; i < params.logits.size(); ++i)
    CHECK(params.logits[i] ==
          doctest::Approx(reference.logits[i]).epsilon(1e-7));
}

TEST_CASE("apply_update: non-finite inputs abort with diagnostics") {
  TaskSet tasks = small_tasks(Split::train);
  TrainConfig cfg = tiny_config();
  PolicyParams params = PolicyParams::zeros(tasks.vocab(), 2);

  Group g;
  g.question_id = tasks.tasks[0].id;
  g.prompt = tasks.tasks[0].prompt;
  Trajectory t1;
  t1.tokens = {1, 15};
  t1.old_logprob = {std::nan(""), -1.0};
  t1.reward = 1.0;
  Trajectory t2;
  t2.tokens = {2, 15};
  t2.old_logprob = {-1.0, -1.0};
  t2.reward = 0.0;
  g.trajectories = {t1, t2};
  g.advantages = group_advantage({1.0, 0.0});

  OptimizerState opt;
  std::vector<const Group*> minibatch = {&g};
  CHECK_THROWS_AS(apply_update(params, minibatch, cfg, opt), Error);
}

TEST_CASE("train: run log has exactly total_steps rows and is deterministic") {
  TaskSet train_tasks = small_tasks(Split::train);
  TaskSet eval_tasks = small_tasks(Split::eval, 6);
  TrainConfig cfg = tiny_config();
  PolicyParams init = PolicyParams::zeros(train_tasks.vocab(), cfg.context_len);

  TrainResult a = train(cfg, train_tasks, eval_tasks, nullptr, init);
  CHECK(a.log.rows.size() == static_cast<std::size_t>(cfg.total_steps));
  for (std::size_t i = 0; i < a.log.rows.size(); ++i)
    CHECK(a.log.rows[i].step == static_cast<long>(i + 1));
  // Eval rows at the cadence and at the final step.
  CHECK(a.log.rows[2].eval_pass1.has_value());
  CHECK(a.log.rows[5].eval_pass1.has_value());
  CHECK_FALSE(a.log.rows[0].eval_pass1.has_value());

  TrainResult b = train(cfg, train_tasks, eval_tasks, nullptr, init);
  CHECK(a.params.logits == b.params.logits);
  REQUIRE(a.log.rows.size() == b.log.rows.size());
  for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
    CHECK(a.log.rows[i].objective == b.log.rows[i].objective);
    CHECK(a.log.rows[i].clip_fraction == b.log.rows[i].clip_fraction);
    CHECK(a.log.rows[i].train_reward_mean == b.log.rows[i].train_reward_mean);
    CHECK(a.log.rows[i].eval_pass1 == b.log.rows[i].eval_pass1);
  }
}

TEST_CASE("train: M=0 with a pool is bit-identical to the vanilla path") {
  TaskSet train_tasks = small_tasks(Split::train);
  TaskSet eval_tasks = small_tasks(Split::eval, 6);
  TrainConfig cfg = tiny_config();
  cfg.m = 0;
  PolicyParams init = PolicyParams::zeros(train_tasks.vocab(), cfg.context_len);
  ExperiencePool pool = canonical_pool(train_tasks);

  TrainResult vanilla = train(cfg, train_tasks, eval_tasks, nullptr, init);
  TrainResult rlep_m0 = train(cfg, train_tasks, eval_tasks, &pool, init);

  REQUIRE(vanilla.params.logits.size() == rlep_m0.params.logits.size());
  CHECK(std::memcmp(vanilla.params.logits.data(), rlep_m0.params.logits.data(),
                    vanilla.params.logits.size() * sizeof(double)) == 0);
  REQUIRE(vanilla.log.rows.size() == rlep_m0.log.rows.size());
  for (std::size_t i = 0; i < vanilla.log.rows.size(); ++i) {
    CHECK(vanilla.log.rows[i].objective == rlep_m0.log.rows[i].objective);
    CHECK(vanilla.log.rows[i].eval_pass1 == rlep_m0.log.rows[i].eval_pass1);
  }
}

TEST_CASE("train: params_old frozen within a rollout keeps first ratios at 1") {
  // With a single update per rollout, every update's ratios are exactly 1,
  // so no token is ever clipped.
  TaskSet train_tasks = small_tasks(Split::train);
  TaskSet eval_tasks = small_tasks(Split::eval, 6);
  TrainConfig cfg = tiny_config();
  cfg.prompts_per_rollout = 4;
  cfg.mini_batch_prompts = 4;  // one update per rollout
  cfg.total_steps = 4;
  PolicyParams init = PolicyParams::zeros(train_tasks.vocab(), cfg.context_len);
  TrainResult res = train(cfg, train_tasks, eval_tasks, nullptr, init);
  for (const RunLogRow& row : res.log.rows) CHECK(row.clip_fraction == 0.0);
}

TEST_CASE("train: replayed share matches M within counting error") {
  TaskSet train_tasks = small_tasks(Split::train);
  TrainConfig cfg = tiny_config();
  cfg.g = 4;
  cfg.m = 2;
  PolicyParams params = PolicyParams::zeros(train_tasks.vocab(), 2);
  ExperiencePool pool = canonical_pool(train_tasks);

  std::vector<const Task*> questions;
  for (int i = 0; i < 4; ++i) questions.push_back(&train_tasks.tasks[i]);
  auto fresh = rollout_phase(params, questions, cfg, 3);
  auto groups = assemble_groups(questions, std::move(fresh), &pool, params,
                                nullptr, cfg, 9);
  for (const Group& g : groups) {
    int replayed = 0;
    for (const Trajectory& t : g.trajectories)
      if (t.source == TrajectorySource::replayed) ++replayed;
    CHECK(replayed == cfg.m);
    CHECK(g.trajectories.size() == static_cast<std::size_t>(cfg.g + cfg.m));
  }
}

TEST_CASE("updates_per_rollout is derived from the batch geometry") {
  TrainConfig cfg;
  cfg.prompts_per_rollout = 512;
  cfg.mini_batch_prompts = 64;
  CHECK(cfg.updates_per_rollout() == 8);
  cfg.prompts_per_rollout = 64;
  cfg.mini_batch_prompts = 8;
  CHECK(cfg.updates_per_rollout() == 8);
}

TEST_CASE("train config file round-trip and validation") {
  TrainConfig cfg = tiny_config();
  cfg.clip.aggregation = Aggregation::sequence_mean;
  cfg.optimizer = Optimizer::sgd;
  auto tmp = std::filesystem::temp_directory_path() / "rlep_cfg.txt";
  save_train_config(cfg, tmp.string());
  TrainConfig loaded = load_train_config(tmp.string());
  CHECK(loaded.g == cfg.g);
  CHECK(loaded.m == cfg.m);
  CHECK(loaded.prompts_per_rollout == cfg.prompts_per_rollout);
  CHECK(loaded.mini_batch_prompts == cfg.mini_batch_prompts);
  CHECK(loaded.total_steps == cfg.total_steps);
  CHECK(loaded.learning_rate == cfg.learning_rate);
  CHECK(loaded.optimizer == cfg.optimizer);
  CHECK(loaded.clip.aggregation == cfg.clip.aggregation);
  CHECK(loaded.seed == cfg.seed);
  std::filesystem::remove(tmp);

  auto bad = std::filesystem::temp_directory_path() / "rlep_cfg_bad.txt";
  {
    std::ofstream out(bad);
    out << "g = 4\nnot_a_key = 1\n";
  }
  try {
    load_train_config(bad.string());
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.category() == "config");
    CHECK(std::string(e.what()).find("not_a_key") != std::string::npos);
  }
  std::filesystem::remove(bad);

  TrainConfig invalid = tiny_config();
  invalid.prompts_per_rollout = 5;
  invalid.mini_batch_prompts = 2;
  CHECK_THROWS_AS(invalid.validate(), Error);
  invalid = tiny_config();
  invalid.g = 1;
  CHECK_THROWS_AS(invalid.validate(), Error);
}

TEST_CASE("optimizer state round-trips exactly") {
  OptimizerState st;
  st.t = 17;
  Rng rng(4);
  st.m1.resize(32);
  st.m2.resize(32);
  for (std::size_t i = 0; i < 32; ++i) {
    st.m1[i] = 2.0 * uniform01(rng) - 1.0;
    st.m2[i] = uniform01(rng);
  }
  auto tmp = std::filesystem::temp_directory_path() / "rlep_opt.txt";
  save_optimizer_state(st, tmp.string());
  OptimizerState loaded = load_optimizer_state(tmp.string());
  CHECK(loaded.t == st.t);
  CHECK(loaded.m1 == st.m1);
  CHECK(loaded.m2 == st.m2);
  std::filesystem::remove(tmp);
}
