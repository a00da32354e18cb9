#include "rlep/pool.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace rlep {

std::size_t ExperiencePool::record_count() const {
  std::size_t n = 0;
  for (const auto& [_, recs] : by_question) n += recs.size();
  return n;
}

ExperiencePool collect(const PolicyParams& seed_params, const TaskSet& tasks,
                       int candidates_per_question, double temperature,
                       double top_p, int min_paths, std::uint64_t seed,
                       int max_response_len,
                       const std::string& source_checkpoint,
                       long collection_step, CollectStats* stats,
                       int workers) {
  if (tasks.tasks.empty()) fail("config", "collect: empty taskset");
  if (min_paths < 1) fail("config", "min_paths must be >= 1");
  if (candidates_per_question < min_paths)
    fail("config", "candidates_per_question must be >= min_paths");

  CollectStats local;
  local.questions_total = static_cast<int>(tasks.tasks.size());

  // Per-question sampling is independent and seeded by task index, so the
  // result does not depend on the worker count.
  std::vector<std::vector<ExperienceRecord>> kept(tasks.tasks.size());
  std::vector<long> verified_counts(tasks.tasks.size(), 0);
  std::vector<long> dedup_counts(tasks.tasks.size(), 0);
  parallel_for(tasks.tasks.size(), workers, [&](std::size_t qi) {
    const Task& task = tasks.tasks[qi];
    Rng rng = make_rng(seed, "collect", qi);
    std::set<TokenSeq> seen;
    for (int c = 0; c < candidates_per_question; ++c) {
      SampledSequence s = sample(seed_params, task.prompt, max_response_len,
                                 temperature, top_p, rng);
      if (verify(task, s.tokens) != 1.0) continue;
      ++verified_counts[qi];
      if (!seen.insert(s.tokens).second) {
        ++dedup_counts[qi];
        continue;
      }
      ExperienceRecord rec;
      rec.question_id = task.id;
      rec.response_tokens = s.tokens;
      rec.reward = 1.0;
      rec.source_checkpoint = source_checkpoint;
      rec.collection_step = collection_step;
      kept[qi].push_back(std::move(rec));
    }
  });

  ExperiencePool pool;
  pool.min_paths = min_paths;
  for (std::size_t qi = 0; qi < tasks.tasks.size(); ++qi) {
    local.candidates_sampled += candidates_per_question;
    local.verified += verified_counts[qi];
    local.deduped += dedup_counts[qi];
    if (static_cast<int>(kept[qi].size()) < min_paths) continue;
    ++local.questions_retained;
    pool.by_question[tasks.tasks[qi].id] = std::move(kept[qi]);
  }
  if (stats) *stats = local;
  return pool;
}

namespace {

std::string join_tokens(const TokenSeq& tokens) {
  std::ostringstream out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out << ' ';
    out << tokens[i];
  }
  return out.str();
}

}  // namespace

void save_pool(const ExperiencePool& pool, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot open for writing: " + path);
  out << "rlep-pool v1\n";
  out << "min_paths " << pool.min_paths << "\n";
  for (const auto& [qid, recs] : pool.by_question) {
    for (const ExperienceRecord& r : recs) {
      out << qid << '\t' << join_tokens(r.response_tokens) << '\t' << r.reward
          << '\t' << r.source_checkpoint << '\t' << r.collection_step << '\n';
    }
  }
  if (!out) fail("io", "write failed: " + path);
}

ExperiencePool load_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open: " + path);
  std::string line;
  int line_no = 0;

  auto corrupt = [&](const std::string& msg) {
    fail("corrupt-pool", path + ":" + std::to_string(line_no) + ": " + msg);
  };

  ++line_no;
  if (!std::getline(in, line) || line != "rlep-pool v1")
    corrupt("missing pool header");
  ++line_no;
  if (!std::getline(in, line) || line.rfind("min_paths ", 0) != 0)
    corrupt("missing min_paths header");
  ExperiencePool pool;
  pool.min_paths = std::atoi(line.c_str() + 10);
  if (pool.min_paths < 1) corrupt("min_paths must be >= 1");

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      std::size_t pos = line.find('\t', start);
      if (pos == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (fields.size() != 5) corrupt("expected 5 tab-separated fields");

    ExperienceRecord rec;
    rec.question_id = fields[0];
    std::istringstream toks(fields[1]);
    std::string tok;
    while (toks >> tok) {
      char* endp = nullptr;
      long v = std::strtol(tok.c_str(), &endp, 10);
      if (endp == tok.c_str() || *endp != '\0')
        corrupt("bad token '" + tok + "'");
      rec.response_tokens.push_back(static_cast<TokenId>(v));
    }
    if (rec.response_tokens.empty()) corrupt("empty response");
    char* endp = nullptr;
    rec.reward = std::strtod(fields[2].c_str(), &endp);
    if (endp == fields[2].c_str() || *endp != '\0')
      corrupt("bad reward '" + fields[2] + "'");
    if (rec.reward != 1.0)
      fail("integrity", path + ":" + std::to_string(line_no) +
                            ": stored reward must be 1, got " + fields[2]);
    rec.source_checkpoint = fields[3];
    rec.collection_step = std::strtol(fields[4].c_str(), &endp, 10);
    if (endp == fields[4].c_str() || *endp != '\0')
      corrupt("bad collection_step '" + fields[4] + "'");
    pool.by_question[rec.question_id].push_back(std::move(rec));
  }

  for (const auto& [qid, recs] : pool.by_question) {
    if (static_cast<int>(recs.size()) < pool.min_paths)
      fail("integrity", path + ": question '" + qid + "' has " +
                            std::to_string(recs.size()) +
                            " records, fewer than min_paths " +
                            std::to_string(pool.min_paths));
    std::set<TokenSeq> seen;
    for (const ExperienceRecord& r : recs)
      if (!seen.insert(r.response_tokens).second)
        fail("integrity",
             path + ": duplicate response for question '" + qid + "'");
  }
  return pool;
}

void verify_pool(const ExperiencePool& pool, const TaskSet& tasks) {
  for (const auto& [qid, recs] : pool.by_question) {
    const Task* task = tasks.find(qid);
    if (!task)
      fail("integrity", "pool question '" + qid + "' not in taskset");
    for (const ExperienceRecord& r : recs) {
      if (verify(*task, r.response_tokens) != 1.0)
        fail("integrity",
             "pool record for question '" + qid + "' fails re-verification");
    }
  }
}

std::vector<ExperienceRecord> sample_replay(const ExperiencePool& pool,
                                            const std::string& question_id,
                                            int m, Rng& rng) {
  auto it = pool.by_question.find(question_id);
  if (it == pool.by_question.end())
    fail("missing-question", "question '" + question_id + "' not in pool");
  const auto& recs = it->second;
  std::vector<ExperienceRecord> out;
  if (m <= 0) return out;
  out.reserve(m);
  if (static_cast<std::size_t>(m) <= recs.size()) {
    // Partial Fisher-Yates over indices: without replacement.
    std::vector<std::size_t> idx(recs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int k = 0; k < m; ++k) {
      std::size_t j = k + uniform_below(rng, idx.size() - k);
      std::swap(idx[k], idx[j]);
      out.push_back(recs[idx[k]]);
    }
  } else {
    for (int k = 0; k < m; ++k)
      out.push_back(recs[uniform_below(rng, recs.size())]);
  }
  return out;
}

}  // namespace rlep
