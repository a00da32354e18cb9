#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rlep/common.hpp"
#include "rlep/grpo.hpp"
#include "rlep/policy.hpp"
#include "rlep/pool.hpp"
#include "rlep/run_log.hpp"
#include "rlep/tasks.hpp"

namespace rlep {

enum class Optimizer { sgd, adam };
enum class ReplayMissingPolicy { skip_replay, error };

// Behavior log-probs for replayed trajectories: recomputed under the current
// rollout's behavior policy (default), or under the checkpoint that collected
// them (ablation; requires collection_checkpoint).
enum class ReplayOldLogprob { behavior, collection };

struct TrainConfig {
  int g = 8;  // fresh rollouts per question (G)
  int m = 2;  // replayed trajectories per question (M)
  int prompts_per_rollout = 64;
  int mini_batch_prompts = 8;
  int total_steps = 200;
  int max_response_len = 16;
  double learning_rate = 0.05;
  Optimizer optimizer = Optimizer::adam;
  ClipConfig clip;
  std::uint64_t seed = 1;
  ReplayMissingPolicy replay_missing_policy = ReplayMissingPolicy::skip_replay;
  ReplayOldLogprob replay_old_logprob = ReplayOldLogprob::behavior;
  std::string collection_checkpoint;
  std::string warm_start_checkpoint;
  int context_len = 2;
  int eval_every = 10;    // 0: evaluate only at the final step
  int eval_samples = 32;  // N of Maj@N
  double eval_temperature = 1.0;
  double eval_top_p = 1.0;
  int checkpoint_every = 0;  // 0: write only the final checkpoint
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  int updates_per_rollout() const {
    return prompts_per_rollout / mini_batch_prompts;
  }
  void validate() const;
};

// Flat key=value text. Keys mirror the field names above; unknown keys are
// errors. updates_per_rollout may be given but must match the derived value.
TrainConfig load_train_config(const std::string& path);
void save_train_config(const TrainConfig& cfg, const std::string& path);

// Adam moments over the full logit table. SGD keeps no state.
struct OptimizerState {
  long t = 0;
  std::vector<double> m1;
  std::vector<double> m2;

  void init(std::size_t n);
};

void save_optimizer_state(const OptimizerState& st, const std::string& path);
OptimizerState load_optimizer_state(const std::string& path);

struct UpdateStats {
  double objective = 0.0;
  double clip_fraction = 0.0;
  double train_reward_mean = 0.0;  // fresh rollouts only
};

// G fresh trajectories per question, sampled at temperature 1 / top-p 1 from
// `params` (the behavior policy), scored by verify(). Per-question generators
// are derived from `stream_seed`, so results are worker-count independent.
std::vector<std::vector<Trajectory>> rollout_phase(
    const PolicyParams& params, const std::vector<const Task*>& questions,
    const TrainConfig& cfg, std::uint64_t stream_seed, int workers = 1);

// Appends M replayed trajectories per question (reward 1, old_logprob
// recomputed under `params_old` or `collection_params`) and standardizes
// advantages over the combined G' = G + M set.
std::vector<Group> assemble_groups(const std::vector<const Task*>& questions,
                                   std::vector<std::vector<Trajectory>>&& fresh,
                                   const ExperiencePool* pool,
                                   const PolicyParams& params_old,
                                   const PolicyParams* collection_params,
                                   const TrainConfig& cfg,
                                   std::uint64_t replay_stream_seed);

// One ascent step on the mean surrogate over a mini-batch of groups.
UpdateStats apply_update(PolicyParams& params,
                         const std::vector<const Group*>& minibatch,
                         const TrainConfig& cfg, OptimizerState& opt);

// Full-rollout update phase: deterministic shuffled partition of the groups
// into updates_per_rollout mini-batches, one optimizer step each. The
// callback runs after each step (step indices start at 0 within the phase).
using AfterUpdate =
    std::function<void(int update_idx, const UpdateStats& stats)>;
std::vector<UpdateStats> update_phase(PolicyParams& params,
                                      const std::vector<Group>& groups,
                                      const TrainConfig& cfg,
                                      OptimizerState& opt, Rng& batch_rng,
                                      const AfterUpdate& after_update = {},
                                      int max_updates = -1);

struct ResumeState {
  PolicyParams params;
  OptimizerState opt;
  long step = 0;
  RunLog prior_log;
};

struct TrainOptions {
  std::string checkpoint_dir;  // empty: keep everything in memory
  int workers = 1;
  const ResumeState* resume = nullptr;
};

struct TrainResult {
  PolicyParams params;
  RunLog log;
};

// The training loop: rollout -> (optional replay) group assembly ->
// mini-batch updates, for total_steps optimizer updates, with periodic
// held-out evaluation rows in the RunLog. With m == 0 this is the vanilla
// GRPO+ baseline; with m > 0 and a pool it is RLEP replay training.
TrainResult train(const TrainConfig& cfg, const TaskSet& train_tasks,
                  const TaskSet& eval_tasks, const ExperiencePool* pool,
                  const PolicyParams& init_params,
                  const TrainOptions& opts = {});

}  // namespace rlep
