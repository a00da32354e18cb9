#include "rlep/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rlep/eval.hpp"

namespace rlep {

void TrainConfig::validate() const {
  if (g < 2) fail("config", "g must be >= 2");
  if (m < 0) fail("config", "m must be >= 0");
  if (prompts_per_rollout < 1) fail("config", "prompts_per_rollout must be >= 1");
  if (mini_batch_prompts < 1) fail("config", "mini_batch_prompts must be >= 1");
  if (prompts_per_rollout % mini_batch_prompts != 0)
    fail("config", "prompts_per_rollout must be divisible by mini_batch_prompts");
  if (total_steps < 1) fail("config", "total_steps must be >= 1");
  if (max_response_len < 1) fail("config", "max_response_len must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    fail("config", "learning_rate must be finite and >= 0");
  if (!(clip.eps_low > 0.0 && clip.eps_low < 1.0))
    fail("config", "eps_low must lie in (0, 1)");
  if (!(clip.eps_high > 0.0 && clip.eps_high < 1.0))
    fail("config", "eps_high must lie in (0, 1)");
  if (context_len < 1) fail("config", "context_len must be >= 1");
  if (eval_every < 0) fail("config", "eval_every must be >= 0");
  if (eval_samples < 1) fail("config", "eval_samples must be >= 1");
  if (!(eval_temperature > 0.0)) fail("config", "eval_temperature must be positive");
  if (!(eval_top_p > 0.0 && eval_top_p <= 1.0))
    fail("config", "eval_top_p must lie in (0, 1]");
  if (checkpoint_every < 0) fail("config", "checkpoint_every must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0))
    fail("config", "adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    fail("config", "adam_beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail("config", "adam_eps must be positive");
  if (replay_old_logprob == ReplayOldLogprob::collection && m > 0 &&
      collection_checkpoint.empty())
    fail("config",
         "replay_old_logprob=collection requires collection_checkpoint");
}

namespace {

const char* optimizer_name(Optimizer o) {
  return o == Optimizer::sgd ? "sgd" : "adam";
}

Optimizer optimizer_from_name(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  fail("config", "unknown optimizer '" + s + "'");
}

const char* aggregation_name(Aggregation a) {
  return a == Aggregation::token_mean ? "token_mean" : "sequence_mean";
}

Aggregation aggregation_from_name(const std::string& s) {
  if (s == "token_mean") return Aggregation::token_mean;
  if (s == "sequence_mean") return Aggregation::sequence_mean;
  fail("config", "unknown aggregation '" + s + "'");
}

const char* replay_missing_name(ReplayMissingPolicy p) {
  return p == ReplayMissingPolicy::skip_replay ? "skip_replay" : "error";
}

ReplayMissingPolicy replay_missing_from_name(const std::string& s) {
  if (s == "skip_replay") return ReplayMissingPolicy::skip_replay;
  if (s == "error") return ReplayMissingPolicy::error;
  fail("config", "unknown replay_missing_policy '" + s + "'");
}

const char* replay_old_name(ReplayOldLogprob p) {
  return p == ReplayOldLogprob::behavior ? "behavior" : "collection";
}

ReplayOldLogprob replay_old_from_name(const std::string& s) {
  if (s == "behavior") return ReplayOldLogprob::behavior;
  if (s == "collection") return ReplayOldLogprob::collection;
  fail("config", "unknown replay_old_logprob '" + s + "'");
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long parse_long(const std::string& key, const std::string& value) {
  char* endp = nullptr;
  long v = std::strtol(value.c_str(), &endp, 10);
  if (endp == value.c_str() || *endp != '\0')
    fail("config", "key '" + key + "': bad integer '" + value + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  char* endp = nullptr;
  double v = std::strtod(value.c_str(), &endp);
  if (endp == value.c_str() || *endp != '\0')
    fail("config", "key '" + key + "': bad number '" + value + "'");
  return v;
}

}  // namespace

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open config: " + path);
  TrainConfig cfg;
  bool saw_updates_per_rollout = false;
  long declared_updates = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail("config", path + ":" + std::to_string(line_no) +
                         ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      fail("config", path + ":" + std::to_string(line_no) +
                         ": expected key = value");

    if (key == "g") cfg.g = static_cast<int>(parse_long(key, value));
    else if (key == "m") cfg.m = static_cast<int>(parse_long(key, value));
    else if (key == "prompts_per_rollout")
      cfg.prompts_per_rollout = static_cast<int>(parse_long(key, value));
    else if (key == "mini_batch_prompts")
      cfg.mini_batch_prompts = static_cast<int>(parse_long(key, value));
    else if (key == "updates_per_rollout") {
      saw_updates_per_rollout = true;
      declared_updates = parse_long(key, value);
    } else if (key == "total_steps")
      cfg.total_steps = static_cast<int>(parse_long(key, value));
    else if (key == "max_response_len")
      cfg.max_response_len = static_cast<int>(parse_long(key, value));
    else if (key == "learning_rate")
      cfg.learning_rate = parse_double(key, value);
    else if (key == "optimizer")
      cfg.optimizer = optimizer_from_name(value);
    else if (key == "eps_low")
      cfg.clip.eps_low = parse_double(key, value);
    else if (key == "eps_high")
      cfg.clip.eps_high = parse_double(key, value);
    else if (key == "aggregation")
      cfg.clip.aggregation = aggregation_from_name(value);
    else if (key == "seed") {
      char* endp = nullptr;
      cfg.seed = std::strtoull(value.c_str(), &endp, 10);
      if (endp == value.c_str() || *endp != '\0')
        fail("config", "key 'seed': bad integer '" + value + "'");
    } else if (key == "replay_missing_policy")
      cfg.replay_missing_policy = replay_missing_from_name(value);
    else if (key == "replay_old_logprob")
      cfg.replay_old_logprob = replay_old_from_name(value);
    else if (key == "collection_checkpoint")
      cfg.collection_checkpoint = value;
    else if (key == "warm_start_checkpoint")
      cfg.warm_start_checkpoint = value;
    else if (key == "context_len")
      cfg.context_len = static_cast<int>(parse_long(key, value));
    else if (key == "eval_every")
      cfg.eval_every = static_cast<int>(parse_long(key, value));
    else if (key == "eval_samples")
      cfg.eval_samples = static_cast<int>(parse_long(key, value));
    else if (key == "eval_temperature")
      cfg.eval_temperature = parse_double(key, value);
    else if (key == "eval_top_p")
      cfg.eval_top_p = parse_double(key, value);
    else if (key == "checkpoint_every")
      cfg.checkpoint_every = static_cast<int>(parse_long(key, value));
    else if (key == "adam_beta1")
      cfg.adam_beta1 = parse_double(key, value);
    else if (key == "adam_beta2")
      cfg.adam_beta2 = parse_double(key, value);
    else if (key == "adam_eps")
      cfg.adam_eps = parse_double(key, value);
    else
      fail("config", path + ":" + std::to_string(line_no) +
                         ": unknown key '" + key + "'");
  }
  cfg.validate();
  if (saw_updates_per_rollout && declared_updates != cfg.updates_per_rollout())
    fail("config", "updates_per_rollout is derived (" +
                       std::to_string(cfg.updates_per_rollout()) +
                       ") and does not match the declared value " +
                       std::to_string(declared_updates));
  return cfg;
}

void save_train_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot open for writing: " + path);
  out << "g = " << cfg.g << "\n";
  out << "m = " << cfg.m << "\n";
  out << "prompts_per_rollout = " << cfg.prompts_per_rollout << "\n";
  out << "mini_batch_prompts = " << cfg.mini_batch_prompts << "\n";
  out << "updates_per_rollout = " << cfg.updates_per_rollout() << "\n";
  out << "total_steps = " << cfg.total_steps << "\n";
  out << "max_response_len = " << cfg.max_response_len << "\n";
  out << "learning_rate = " << format_double(cfg.learning_rate) << "\n";
  out << "optimizer = " << optimizer_name(cfg.optimizer) << "\n";
  out << "eps_low = " << format_double(cfg.clip.eps_low) << "\n";
  out << "eps_high = " << format_double(cfg.clip.eps_high) << "\n";
  out << "aggregation = " << aggregation_name(cfg.clip.aggregation) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "replay_missing_policy = "
      << replay_missing_name(cfg.replay_missing_policy) << "\n";
  out << "replay_old_logprob = " << replay_old_name(cfg.replay_old_logprob)
      << "\n";
  if (!cfg.collection_checkpoint.empty())
    out << "collection_checkpoint = " << cfg.collection_checkpoint << "\n";
  if (!cfg.warm_start_checkpoint.empty())
    out << "warm_start_checkpoint = " << cfg.warm_start_checkpoint << "\n";
  out << "context_len = " << cfg.context_len << "\n";
  out << "eval_every = " << cfg.eval_every << "\n";
  out << "eval_samples = " << cfg.eval_samples << "\n";
  out << "eval_temperature = " << format_double(cfg.eval_temperature) << "\n";
  out << "eval_top_p = " << format_double(cfg.eval_top_p) << "\n";
  out << "checkpoint_every = " << cfg.checkpoint_every << "\n";
  out << "adam_beta1 = " << format_double(cfg.adam_beta1) << "\n";
  out << "adam_beta2 = " << format_double(cfg.adam_beta2) << "\n";
  out << "adam_eps = " << format_double(cfg.adam_eps) << "\n";
  if (!out) fail("io", "write failed: " + path);
}

void OptimizerState::init(std::size_t n) {
  if (m1.empty()) {
    m1.assign(n, 0.0);
    m2.assign(n, 0.0);
  } else if (m1.size() != n) {
    fail("config", "optimizer state size mismatch");
  }
}

void save_optimizer_state(const OptimizerState& st, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot open for writing: " + path);
  out << "rlep-optstate v1\n";
  out << "t " << st.t << "\n";
  out << "n " << st.m1.size() << "\n";
  char buf[64];
  for (std::size_t i = 0; i < st.m1.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%a %a", st.m1[i], st.m2[i]);
    out << buf << '\n';
  }
  if (!out) fail("io", "write failed: " + path);
}

OptimizerState load_optimizer_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open: " + path);
  std::string magic, version, key;
  in >> magic >> version;
  if (magic != "rlep-optstate" || version != "v1")
    fail("io", "not an optimizer state file: " + path);
  OptimizerState st;
  std::size_t n = 0;
  in >> key >> st.t;
  if (key != "t") fail("io", "bad optimizer state header: " + path);
  in >> key >> n;
  if (key != "n") fail("io", "bad optimizer state header: " + path);
  st.m1.resize(n);
  st.m2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string a, b;
    if (!(in >> a >> b)) fail("io", "truncated optimizer state: " + path);
    st.m1[i] = std::strtod(a.c_str(), nullptr);
    st.m2[i] = std::strtod(b.c_str(), nullptr);
  }
  return st;
}

std::vector<std::vector<Trajectory>> rollout_phase(
    const PolicyParams& params, const std::vector<const Task*>& questions,
    const TrainConfig& cfg, std::uint64_t stream_seed, int workers) {
  std::vector<std::vector<Trajectory>> fresh(questions.size());
  parallel_for(questions.size(), workers, [&](std::size_t qi) {
    const Task& task = *questions[qi];
    Rng rng = make_rng(stream_seed, "q", qi);
    std::vector<Trajectory> list;
    list.reserve(cfg.g);
    for (int k = 0; k < cfg.g; ++k) {
      // Training-time decoding: temperature 1, top-p 1.
      SampledSequence s =
          sample(params, task.prompt, cfg.max_response_len, 1.0, 1.0, rng);
      Trajectory traj;
      traj.source = TrajectorySource::fresh;
      traj.tokens = std::move(s.tokens);
      traj.old_logprob = std::move(s.per_token_logprob);
      traj.reward = verify(task, traj.tokens);
      list.push_back(std::move(traj));
    }
    fresh[qi] = std::move(list);
  });
  return fresh;
}

std::vector<Group> assemble_groups(const std::vector<const Task*>& questions,
                                   std::vector<std::vector<Trajectory>>&& fresh,
                                   const ExperiencePool* pool,
                                   const PolicyParams& params_old,
                                   const PolicyParams* collection_params,
                                   const TrainConfig& cfg,
                                   std::uint64_t replay_stream_seed) {
  if (fresh.size() != questions.size())
    fail("invalid-group", "rollout/question count mismatch");
  if (cfg.m > 0 && pool == nullptr)
    fail("config", "m > 0 requires an experience pool");

  const PolicyParams& replay_policy =
      (cfg.replay_old_logprob == ReplayOldLogprob::collection &&
       collection_params != nullptr)
          ? *collection_params
          : params_old;

  std::vector<Group> groups;
  groups.reserve(questions.size());
  for (std::size_t qi = 0; qi < questions.size(); ++qi) {
    const Task& task = *questions[qi];
    Group group;
    group.question_id = task.id;
    group.prompt = task.prompt;
    group.trajectories = std::move(fresh[qi]);

    if (cfg.m > 0) {
      bool present = pool->by_question.count(task.id) > 0;
      if (!present &&
          cfg.replay_missing_policy == ReplayMissingPolicy::error) {
        fail("missing-question",
             "question '" + task.id + "' absent from experience pool");
      }
      if (present) {
        Rng rng = make_rng(replay_stream_seed, "q", qi);
        for (ExperienceRecord& rec :
             sample_replay(*pool, task.id, cfg.m, rng)) {
          Trajectory traj;
          traj.source = TrajectorySource::replayed;
          traj.tokens = std::move(rec.response_tokens);
          traj.old_logprob =
              logprob(replay_policy, group.prompt, traj.tokens);
          traj.reward = 1.0;
          group.trajectories.push_back(std::move(traj));
        }
      }
    }

    std::vector<double> rewards;
    rewards.reserve(group.trajectories.size());
    for (const Trajectory& t : group.trajectories) rewards.push_back(t.reward);
    group.advantages = group_advantage(rewards);
    groups.push_back(std::move(group));
  }
  return groups;
}

namespace {

void optimizer_step(PolicyParams& params, const SparseGrad& grad,
                    const TrainConfig& cfg, OptimizerState& opt) {
  const int cols = params.vocab.size;
  if (cfg.optimizer == Optimizer::sgd) {
    for (const auto& [row, vals] : grad.rows) {
      double* dst = params.row(row);
      for (int c = 0; c < cols; ++c) dst[c] += cfg.learning_rate * vals[c];
    }
    return;
  }

  // Adam, maximizing. Moments decay over the whole table each step; the
  // gradient is zero outside the touched rows.
  opt.init(params.logits.size());
  ++opt.t;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  for (double& v : opt.m1) v *= b1;
  for (double& v : opt.m2) v *= b2;
  for (const auto& [row, vals] : grad.rows) {
    std::size_t base = static_cast<std::size_t>(row) * cols;
    for (int c = 0; c < cols; ++c) {
      opt.m1[base + c] += (1.0 - b1) * vals[c];
      opt.m2[base + c] += (1.0 - b2) * vals[c] * vals[c];
    }
  }
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(opt.t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(opt.t));
  for (std::size_t i = 0; i < params.logits.size(); ++i) {
    const double mhat = opt.m1[i] / corr1;
    const double vhat = opt.m2[i] / corr2;
    params.logits[i] += cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

std::string describe_groups(const std::vector<const Group*>& minibatch) {
  std::ostringstream out;
  for (const Group* g : minibatch) {
    out << "\n  group '" << g->question_id << "' rewards=[";
    for (std::size_t i = 0; i < g->trajectories.size(); ++i)
      out << (i ? "," : "") << g->trajectories[i].reward;
    out << "] advantages=[";
    for (std::size_t i = 0; i < g->advantages.size(); ++i)
      out << (i ? "," : "") << g->advantages[i];
    out << "]";
  }
  return out.str();
}

}  // namespace

UpdateStats apply_update(PolicyParams& params,
                         const std::vector<const Group*>& minibatch,
                         const TrainConfig& cfg, OptimizerState& opt) {
  if (minibatch.empty()) fail("invalid-group", "empty mini-batch");
  SparseGrad grad;
  double objective = 0.0;
  std::int64_t tokens = 0, clipped = 0;
  double fresh_reward = 0.0;
  long fresh_count = 0;
  for (const Group* group : minibatch) {
    SurrogateResult res = surrogate_objective(params, *group, cfg.clip);
    objective += res.objective;
    grad.add(res.grad);
    tokens += res.token_count;
    clipped += res.clipped_tokens;
    for (const Trajectory& t : group->trajectories) {
      if (t.source == TrajectorySource::fresh) {
        fresh_reward += t.reward;
        ++fresh_count;
      }
    }
  }
  const double scale = 1.0 / static_cast<double>(minibatch.size());
  objective *= scale;
  grad.scale(scale);

  if (!std::isfinite(objective) || !grad.finite())
    fail("numeric",
         "non-finite objective or gradient in mini-batch:" +
             describe_groups(minibatch));

  optimizer_step(params, grad, cfg, opt);

  UpdateStats stats;
  stats.objective = objective;
  stats.clip_fraction =
      tokens > 0 ? static_cast<double>(clipped) / static_cast<double>(tokens)
                 : 0.0;
  stats.train_reward_mean =
      fresh_count > 0 ? fresh_reward / static_cast<double>(fresh_count) : 0.0;
  return stats;
}

std::vector<UpdateStats> update_phase(PolicyParams& params,
                                      const std::vector<Group>& groups,
                                      const TrainConfig& cfg,
                                      OptimizerState& opt, Rng& batch_rng,
                                      const AfterUpdate& after_update,
                                      int max_updates) {
  if (groups.size() != static_cast<std::size_t>(cfg.prompts_per_rollout))
    fail("invalid-group", "expected " +
                              std::to_string(cfg.prompts_per_rollout) +
                              " groups, got " + std::to_string(groups.size()));
  std::vector<std::size_t> order(groups.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = uniform_below(batch_rng, i);
    std::swap(order[i - 1], order[j]);
  }

  std::vector<UpdateStats> all;
  int updates = cfg.updates_per_rollout();
  if (max_updates >= 0) updates = std::min(updates, max_updates);
  all.reserve(updates);
  for (int u = 0; u < updates; ++u) {
    std::vector<const Group*> minibatch;
    minibatch.reserve(cfg.mini_batch_prompts);
    for (int k = 0; k < cfg.mini_batch_prompts; ++k)
      minibatch.push_back(&groups[order[u * cfg.mini_batch_prompts + k]]);
    UpdateStats stats = apply_update(params, minibatch, cfg, opt);
    all.push_back(stats);
    if (after_update) after_update(u, stats);
  }
  return all;
}

namespace {

std::vector<const Task*> select_questions(const TaskSet& tasks, int count,
                                          Rng& rng) {
  const std::size_t n = tasks.tasks.size();
  std::vector<const Task*> out;
  out.reserve(count);
  if (static_cast<std::size_t>(count) <= n) {
    // Partial Fisher-Yates: a distinct random subset per rollout.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (int k = 0; k < count; ++k) {
      std::size_t j = k + uniform_below(rng, n - k);
      std::swap(idx[k], idx[j]);
      out.push_back(&tasks.tasks[idx[k]]);
    }
  } else {
    for (int k = 0; k < count; ++k)
      out.push_back(&tasks.tasks[uniform_below(rng, n)]);
  }
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TaskSet& train_tasks,
                  const TaskSet& eval_tasks, const ExperiencePool* pool,
                  const PolicyParams& init_params, const TrainOptions& opts) {
  cfg.validate();
  if (train_tasks.tasks.empty()) fail("config", "train: empty train taskset");
  if (eval_tasks.tasks.empty()) fail("config", "train: empty eval taskset");
  if (cfg.m > 0 && pool == nullptr)
    fail("config", "m > 0 requires an experience pool");

  PolicyParams collection_params;
  bool have_collection_params = false;
  if (cfg.m > 0 && cfg.replay_old_logprob == ReplayOldLogprob::collection) {
    collection_params = load_params(cfg.collection_checkpoint);
    have_collection_params = true;
  }

  const int updates_per_rollout = cfg.updates_per_rollout();
  PolicyParams params = opts.resume ? opts.resume->params : init_params;
  OptimizerState opt;
  RunLog log;
  long step = 0;
  if (opts.resume) {
    if (opts.resume->step % updates_per_rollout != 0)
      fail("config", "resume step must be a rollout boundary (multiple of " +
                         std::to_string(updates_per_rollout) + ")");
    opt = opts.resume->opt;
    step = opts.resume->step;
    log = opts.resume->prior_log;
  }

  auto checkpoint_path = [&](long s) {
    return opts.checkpoint_dir + "/checkpoint_step" + std::to_string(s) +
           ".txt";
  };
  auto optstate_path = [&](long s) {
    return opts.checkpoint_dir + "/optstate_step" + std::to_string(s) + ".txt";
  };

  while (step < cfg.total_steps) {
    const long rollout_idx = step / updates_per_rollout;
    const PolicyParams params_old = params;

    Rng batch_rng = make_rng(cfg.seed, "batching", rollout_idx);
    std::vector<const Task*> questions =
        select_questions(train_tasks, cfg.prompts_per_rollout, batch_rng);

    std::vector<std::vector<Trajectory>> fresh =
        rollout_phase(params_old, questions, cfg,
                      derive_seed(cfg.seed, "sampling", rollout_idx),
                      opts.workers);
    std::vector<Group> groups = assemble_groups(
        questions, std::move(fresh), pool, params_old,
        have_collection_params ? &collection_params : nullptr, cfg,
        derive_seed(cfg.seed, "replay", rollout_idx));

    const int remaining = static_cast<int>(cfg.total_steps - step);
    update_phase(params, groups, cfg, opt, batch_rng,
                 [&](int /*update_idx*/, const UpdateStats& stats) {
                   ++step;
                   RunLogRow row;
                   row.step = step;
                   row.objective = stats.objective;
                   row.clip_fraction = stats.clip_fraction;
                   row.train_reward_mean = stats.train_reward_mean;
                   const bool do_eval =
                       (cfg.eval_every > 0 && step % cfg.eval_every == 0) ||
                       step == cfg.total_steps;
                   if (do_eval) {
                     EvalReport rep = evaluate(
                         params, eval_tasks, cfg.eval_samples,
                         cfg.eval_temperature, cfg.eval_top_p,
                         derive_seed(cfg.seed, "eval", step),
                         cfg.max_response_len, opts.workers);
                     row.eval_pass1 = rep.pass1;
                     row.eval_majn = rep.maj_n;
                   }
                   log.rows.push_back(row);
                   if (!opts.checkpoint_dir.empty() &&
                       cfg.checkpoint_every > 0 &&
                       step % cfg.checkpoint_every == 0) {
                     save_params(params, checkpoint_path(step));
                     save_optimizer_state(opt, optstate_path(step));
                   }
                 },
                 remaining);
  }

  if (!opts.checkpoint_dir.empty()) {
    save_params(params, opts.checkpoint_dir + "/checkpoint_final.txt");
  }
  return TrainResult{std::move(params), std::move(log)};
}

}  // namespace rlep
