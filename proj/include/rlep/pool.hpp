#pragma once

#include <map>
#include <string>
#include <vector>

#include "rlep/common.hpp"
#include "rlep/policy.hpp"
#include "rlep/tasks.hpp"

namespace rlep {

// A verified-correct response collected from a seed checkpoint. Only
// successes are stored; reward is always 1.
struct ExperienceRecord {
  std::string question_id;
  TokenSeq response_tokens;
  double reward = 1.0;
  std::string source_checkpoint;
  long collection_step = 0;

  bool operator==(const ExperienceRecord&) const = default;
};

// Per-question store of distinct verified trajectories. Records carry no
// log-probs; behavior log-probs for replay are recomputed at training time,
// so the pool stays policy-agnostic.
struct ExperiencePool {
  std::map<std::string, std::vector<ExperienceRecord>> by_question;
  int min_paths = 2;

  bool operator==(const ExperiencePool&) const = default;
  std::size_t question_count() const { return by_question.size(); }
  std::size_t record_count() const;
};

struct CollectStats {
  int questions_total = 0;
  int questions_retained = 0;
  long candidates_sampled = 0;
  long verified = 0;
  long deduped = 0;  // verified duplicates dropped

  double coverage() const {
    return questions_total ? static_cast<double>(questions_retained) /
                                 questions_total
                           : 0.0;
  }
};

// Phase-1 experience collection: sample `candidates_per_question` responses
// per task from the seed policy, keep verified successes, drop exact
// duplicates, and retain a question only if at least `min_paths` distinct
// verified responses remain.
ExperiencePool collect(const PolicyParams& seed_params, const TaskSet& tasks,
                       int candidates_per_question, double temperature,
                       double top_p, int min_paths, std::uint64_t seed,
                       int max_response_len,
                       const std::string& source_checkpoint,
                       long collection_step, CollectStats* stats = nullptr,
                       int workers = 1);

// Line-delimited text format:
//   rlep-pool v1
//   min_paths <n>
//   <question_id>\t<tokens space-separated>\t<reward>\t<source>\t<step>
void save_pool(const ExperiencePool& pool, const std::string& path);

// Structural checks on load: parse failures raise "corrupt-pool" with the
// line number; reward != 1, duplicate responses, or under-min_paths
// questions raise "integrity".
ExperiencePool load_pool(const std::string& path);

// Re-verifies every record against its task; raises "integrity" on the first
// failure (unknown question id or reward mismatch).
void verify_pool(const ExperiencePool& pool, const TaskSet& tasks);

// Uniform replay draw for one question: without replacement when the stored
// count >= m, with replacement otherwise (keeps G' constant across
// questions).
std::vector<ExperienceRecord> sample_replay(const ExperiencePool& pool,
                                            const std::string& question_id,
                                            int m, Rng& rng);

}  // namespace rlep
