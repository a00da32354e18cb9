#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rlep/common.hpp"
#include "rlep/policy.hpp"

namespace rlep {

enum class TaskFamily { ModAdd, Copy, Reverse };

enum class Split { train, eval };

const char* family_name(TaskFamily f);
TaskFamily family_from_name(const std::string& name);
const char* split_name(Split s);
Split split_from_name(const std::string& name);

// One verifiable question: an exact-match answer, END-terminated.
struct Task {
  std::string id;
  TokenSeq prompt;
  TokenSeq answer;  // canonical correct response, ends with END
  TaskFamily family = TaskFamily::ModAdd;
};

struct TaskSet {
  std::vector<Task> tasks;
  Split split = Split::train;
  int vocab_size = 16;

  Vocab vocab() const { return Vocab{vocab_size}; }
  const Task* find(const std::string& id) const;
};

struct TaskGenOptions {
  int modulus = 10;     // ModAdd: answers in [0, modulus)
  int payload_len = 3;  // Copy/Reverse payload length
};

// Deterministic task generation. Two reserved ids at the top of the vocab:
// END (size-1) and an operator/separator token (size-2).
//
// ModAdd encodes "a + b mod p" as the triple [op, a, b] so that both operands
// sit inside a length-2 context window; the answer is the sum token then END.
// Copy answers repeat the prompt payload; Reverse answers reverse it.
TaskSet generate_taskset(TaskFamily family, int count, std::uint64_t seed,
                         Vocab vocab, Split split,
                         const TaskGenOptions& opts = {});

// Binary verifiable reward: 1 iff response, truncated at its first END,
// exactly equals the answer payload. Responses without END score 0; tokens
// after a correct END are ignored.
double verify(const Task& task, const TokenSeq& response);

// Line-delimited text format:
//   rlep-tasks v1
//   split <train|eval>
//   vocab <size>
//   <id>\t<family>\t<prompt tokens space-separated>\t<answer tokens>
void save_taskset(const TaskSet& set, const std::string& path);
TaskSet load_taskset(const std::string& path);

}  // namespace rlep
