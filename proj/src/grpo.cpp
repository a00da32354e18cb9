#include "rlep/grpo.hpp"

#include <cmath>

namespace rlep {

std::vector<double> group_advantage(const std::vector<double>& rewards,
                                    double degeneracy_eps) {
  if (rewards.size() < 2)
    fail("invalid-group", "group needs at least 2 trajectories, got " +
                              std::to_string(rewards.size()));
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  double sd = std::sqrt(var);

  std::vector<double> adv(rewards.size(), 0.0);
  if (sd < degeneracy_eps) return adv;  // degenerate group: no gradient
  for (std::size_t i = 0; i < rewards.size(); ++i)
    adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

double token_ratio(double new_logprob, double old_logprob) {
  if (!std::isfinite(new_logprob) || !std::isfinite(old_logprob))
    fail("invalid-params", "token_ratio: non-finite log-prob");
  return std::exp(new_logprob - old_logprob);
}

TokenTerm clipped_token_term(double ratio, double advantage,
                             const ClipConfig& clip) {
  if (!(ratio > 0.0)) fail("invalid-params", "ratio must be positive");
  const double lo = 1.0 - clip.eps_low;
  const double hi = 1.0 + clip.eps_high;
  const double clamped = ratio < lo ? lo : (ratio > hi ? hi : ratio);
  const double unclipped = ratio * advantage;
  const double clipped = clamped * advantage;
  TokenTerm t;
  if (unclipped <= clipped) {  // ties resolve to the unclipped branch
    t.value = unclipped;
    t.grad_coeff = advantage;
    t.clipped = false;
  } else {
    t.value = clipped;
    t.grad_coeff = 0.0;
    t.clipped = true;
  }
  return t;
}

SurrogateResult surrogate_objective(const PolicyParams& params,
                                    const Group& group,
                                    const ClipConfig& clip) {
  const std::size_t n = group.trajectories.size();
  if (n == 0) fail("invalid-group", "empty group: " + group.question_id);
  if (group.advantages.size() != n)
    fail("invalid-group",
         "advantages not computed for group " + group.question_id);

  std::int64_t total_tokens = 0;
  for (const Trajectory& traj : group.trajectories) {
    if (traj.tokens.empty())
      fail("invalid-group", "empty trajectory in group " + group.question_id);
    if (traj.old_logprob.size() != traj.tokens.size())
      fail("invalid-group",
           "old_logprob length mismatch in group " + group.question_id);
    total_tokens += static_cast<std::int64_t>(traj.tokens.size());
  }

  SurrogateResult res;
  res.token_count = total_tokens;
  for (std::size_t i = 0; i < n; ++i) {
    const Trajectory& traj = group.trajectories[i];
    const double adv = group.advantages[i];
    const double weight =
        clip.aggregation == Aggregation::token_mean
            ? 1.0 / static_cast<double>(total_tokens)
            : 1.0 / (static_cast<double>(n) *
                     static_cast<double>(traj.tokens.size()));
    std::vector<double> new_lp = logprob(params, group.prompt, traj.tokens);
    for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
      const double ratio = token_ratio(new_lp[t], traj.old_logprob[t]);
      const TokenTerm term = clipped_token_term(ratio, adv, clip);
      res.objective += weight * term.value;
      if (term.clipped) ++res.clipped_tokens;
      if (term.grad_coeff != 0.0) {
        // d term / d logits = grad_coeff * ratio * (onehot - softmax(row))
        const std::int64_t row =
            params.context_row(group.prompt, traj.tokens, t);
        std::vector<double> delta = row_dist(params, row);
        for (double& v : delta) v = -v;
        delta[traj.tokens[t]] += 1.0;
        res.grad.accumulate(row, delta, weight * term.grad_coeff * ratio);
      }
    }
  }
  res.clip_fraction = total_tokens > 0
                          ? static_cast<double>(res.clipped_tokens) /
                                static_cast<double>(total_tokens)
                          : 0.0;
  return res;
}

}  // namespace rlep
