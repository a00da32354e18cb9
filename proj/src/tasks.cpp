#include "rlep/tasks.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rlep {

const char* family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::ModAdd: return "modadd";
    case TaskFamily::Copy: return "copy";
    case TaskFamily::Reverse: return "reverse";
  }
  return "?";
}

TaskFamily family_from_name(const std::string& name) {
  if (name == "modadd") return TaskFamily::ModAdd;
  if (name == "copy") return TaskFamily::Copy;
  if (name == "reverse") return TaskFamily::Reverse;
  fail("config", "unknown task family '" + name + "'");
}

const char* split_name(Split s) {
  return s == Split::train ? "train" : "eval";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "eval") return Split::eval;
  fail("config", "unknown split '" + name + "'");
}

const Task* TaskSet::find(const std::string& id) const {
  for (const Task& t : tasks)
    if (t.id == id) return &t;
  return nullptr;
}

TaskSet generate_taskset(TaskFamily family, int count, std::uint64_t seed,
                         Vocab vocab, Split split,
                         const TaskGenOptions& opts) {
  if (count < 1) fail("config", "task count must be >= 1");
  if (vocab.size < 4) fail("config", "vocab too small for task generation");
  const int end = vocab.end_token();
  const int op = vocab.size - 2;
  const int payload_max = vocab.size - 2;  // ids below the op token

  if (family == TaskFamily::ModAdd && opts.modulus > payload_max)
    fail("config", "ModAdd modulus " + std::to_string(opts.modulus) +
                       " exceeds vocab budget (max " +
                       std::to_string(payload_max) + ")");
  if (family != TaskFamily::ModAdd && opts.payload_len < 1)
    fail("config", "payload_len must be >= 1");

  std::string tag = std::string("tasks/") + family_name(family) + "/" +
                    split_name(split);
  Rng rng = make_rng(seed, tag);

  TaskSet set;
  set.split = split;
  set.vocab_size = vocab.size;
  set.tasks.reserve(count);
  for (int i = 0; i < count; ++i) {
    Task t;
    t.family = family;
    std::ostringstream id;
    id << family_name(family) << '-' << split_name(split) << '-' << i;
    t.id = id.str();
    switch (family) {
      case TaskFamily::ModAdd: {
        int p = opts.modulus;
        int a = static_cast<int>(uniform_below(rng, p));
        int b = static_cast<int>(uniform_below(rng, p));
        t.prompt = {op, a, b};
        t.answer = {(a + b) % p, end};
        break;
      }
      case TaskFamily::Copy: {
        TokenSeq payload(opts.payload_len);
        for (auto& tok : payload)
          tok = static_cast<TokenId>(uniform_below(rng, payload_max));
        t.prompt = payload;
        t.answer = payload;
        t.answer.push_back(end);
        break;
      }
      case TaskFamily::Reverse: {
        TokenSeq payload(opts.payload_len);
        for (auto& tok : payload)
          tok = static_cast<TokenId>(uniform_below(rng, payload_max));
        t.prompt = payload;
        t.answer.assign(payload.rbegin(), payload.rend());
        t.answer.push_back(end);
        break;
      }
    }
    set.tasks.push_back(std::move(t));
  }
  return set;
}

double verify(const Task& task, const TokenSeq& response) {
  if (task.answer.empty()) return 0.0;
  const TokenId end = task.answer.back();
  auto it = std::find(response.begin(), response.end(), end);
  if (it == response.end()) return 0.0;  // truncated / no END
  std::size_t payload_len = static_cast<std::size_t>(it - response.begin());
  if (payload_len != task.answer.size() - 1) return 0.0;
  return std::equal(response.begin(), it, task.answer.begin()) ? 1.0 : 0.0;
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

TokenSeq parse_tokens(const std::string& field, const std::string& path,
                      int line_no) {
  TokenSeq out;
  std::istringstream in(field);
  std::string tok;
  while (in >> tok) {
    char* endp = nullptr;
    long v = std::strtol(tok.c_str(), &endp, 10);
    if (endp == tok.c_str() || *endp != '\0')
      fail("io", path + ":" + std::to_string(line_no) + ": bad token '" +
                     tok + "'");
    out.push_back(static_cast<TokenId>(v));
  }
  return out;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

void save_taskset(const TaskSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot open for writing: " + path);
  out << "rlep-tasks v1\n";
  out << "split " << split_name(set.split) << "\n";
  out << "vocab " << set.vocab_size << "\n";
  for (const Task& t : set.tasks) {
    out << t.id << '\t' << family_name(t.family) << '\t'
        << join_tokens(t.prompt) << '\t' << join_tokens(t.answer) << '\n';
  }
  if (!out) fail("io", "write failed: " + path);
}

TaskSet load_taskset(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "rlep-tasks v1")
    fail("io", "not a taskset file: " + path);
  TaskSet set;
  if (!std::getline(in, line) || line.rfind("split ", 0) != 0)
    fail("io", "bad taskset header (split): " + path);
  set.split = split_from_name(line.substr(6));
  if (!std::getline(in, line) || line.rfind("vocab ", 0) != 0)
    fail("io", "bad taskset header (vocab): " + path);
  set.vocab_size = std::stoi(line.substr(6));

  int line_no = 3;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line, '\t');
    if (fields.size() != 4)
      fail("io", path + ":" + std::to_string(line_no) +
                     ": expected 4 tab-separated fields");
    Task t;
    t.id = fields[0];
    t.family = family_from_name(fields[1]);
    t.prompt = parse_tokens(fields[2], path, line_no);
    t.answer = parse_tokens(fields[3], path, line_no);
    if (t.answer.empty() || t.answer.back() != set.vocab().end_token())
      fail("io", path + ":" + std::to_string(line_no) +
                     ": answer is not END-terminated");
    set.tasks.push_back(std::move(t));
  }
  return set;
}

}  // namespace rlep
