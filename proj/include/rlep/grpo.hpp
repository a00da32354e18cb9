#pragma once

#include <string>
#include <vector>

#include "rlep/common.hpp"
#include "rlep/policy.hpp"

namespace rlep {

enum class TrajectorySource { fresh, replayed };

// One response with the behavior-policy log-probs it was scored under.
struct Trajectory {
  TrajectorySource source = TrajectorySource::fresh;
  TokenSeq tokens;
  std::vector<double> old_logprob;  // log pi_old per token, nats
  double reward = 0.0;
};

// All candidate responses for one question, fresh rollouts plus optional
// replayed successes, with advantages standardized over the combined set so
// both share a common baseline.
struct Group {
  std::string question_id;
  TokenSeq prompt;
  std::vector<Trajectory> trajectories;
  std::vector<double> advantages;
};

enum class Aggregation { token_mean, sequence_mean };

// Asymmetric clipping bounds. eps_high >= eps_low ("clip-higher") widens the
// upper bound so positive-advantage tokens keep a gradient longer.
struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;
  Aggregation aggregation = Aggregation::token_mean;
};

struct SurrogateResult {
  double objective = 0.0;
  SparseGrad grad;
  double clip_fraction = 0.0;  // share of tokens on the clipped branch
  std::int64_t token_count = 0;
  std::int64_t clipped_tokens = 0;
};

struct TokenTerm {
  double value = 0.0;
  double grad_coeff = 0.0;  // d value / d ratio
  bool clipped = false;     // clipped constant branch was the min
};

inline constexpr double kDegeneracyEps = 1e-8;

// Group-relative advantages: A_i = (r_i - mean) / std, population std.
// If std < degeneracy_eps the group is degenerate (e.g. all-correct or
// all-wrong) and contributes no gradient: all advantages are exactly zero.
std::vector<double> group_advantage(const std::vector<double>& rewards,
                                    double degeneracy_eps = kDegeneracyEps);

// Token-wise importance ratio pi_theta / pi_theta_old.
double token_ratio(double new_logprob, double old_logprob);

// One token of the clipped surrogate:
//   value = min(ratio * A, clip(ratio, 1-eps_low, 1+eps_high) * A)
// grad_coeff is A on the unclipped branch and 0 when the clipped constant is
// the min. Exact ties go to the unclipped branch.
TokenTerm clipped_token_term(double ratio, double advantage,
                             const ClipConfig& clip);

// Clipped surrogate objective over one group and its gradient w.r.t. the
// current policy's logits.
//
// token_mean:    (1 / sum_i |o_i|) * sum_i sum_t term_{i,t}
// sequence_mean: (1 / G') * sum_i (1/|o_i|) * sum_t term_{i,t}
//
// The gradient chains through the per-token log-prob: each token contributes
// weight * grad_coeff * ratio * (onehot(tok) - softmax(context row)).
SurrogateResult surrogate_objective(const PolicyParams& params,
                                    const Group& group,
                                    const ClipConfig& clip);

}  // namespace rlep
