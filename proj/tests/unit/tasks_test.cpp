#include <doctest.h>

#include <filesystem>
#include <set>

#include "rlep/tasks.hpp"

using namespace rlep;

TEST_CASE("modadd: (3,4) mod 10 answers 7 then END") {
  Vocab v{16};
  TaskGenOptions opts;
  opts.modulus = 10;
  // Scan a generated set for a (3,4) instance; encoding is [op, a, b].
  TaskSet set = generate_taskset(TaskFamily::ModAdd, 500, 1, v, Split::train,
                                 opts);
  bool found = false;
  for (const Task& t : set.tasks) {
    REQUIRE(t.prompt.size() == 3);
    CHECK(t.prompt[0] == v.size - 2);  // operator token
    int a = t.prompt[1], b = t.prompt[2];
    REQUIRE(t.answer.size() == 2);
    CHECK(t.answer[0] == (a + b) % 10);
    CHECK(t.answer[1] == v.end_token());
    if (a == 3 && b == 4) {
      found = true;
      CHECK(t.answer[0] == 7);
    }
  }
  CHECK(found);
}

TEST_CASE("reverse: payload [a,b,c] answers [c,b,a,END]") {
  Vocab v{16};
  TaskSet set =
      generate_taskset(TaskFamily::Reverse, 20, 3, v, Split::train, {});
  for (const Task& t : set.tasks) {
    REQUIRE(t.prompt.size() == 3);
    REQUIRE(t.answer.size() == 4);
    CHECK(t.answer[0] == t.prompt[2]);
    CHECK(t.answer[1] == t.prompt[1]);
    CHECK(t.answer[2] == t.prompt[0]);
    CHECK(t.answer[3] == v.end_token());
  }
}

TEST_CASE("copy: answer repeats the payload") {
  Vocab v{12};
  TaskSet set = generate_taskset(TaskFamily::Copy, 20, 3, v, Split::train, {});
  for (const Task& t : set.tasks) {
    REQUIRE(t.answer.size() == t.prompt.size() + 1);
    for (std::size_t i = 0; i < t.prompt.size(); ++i)
      CHECK(t.answer[i] == t.prompt[i]);
    CHECK(t.answer.back() == v.end_token());
  }
}

TEST_CASE("generation is deterministic and ids are unique per split") {
  Vocab v{16};
  TaskSet a = generate_taskset(TaskFamily::ModAdd, 50, 7, v, Split::train, {});
  TaskSet b = generate_taskset(TaskFamily::ModAdd, 50, 7, v, Split::train, {});
  REQUIRE(a.tasks.size() == b.tasks.size());
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    CHECK(a.tasks[i].id == b.tasks[i].id);
    CHECK(a.tasks[i].prompt == b.tasks[i].prompt);
    CHECK(a.tasks[i].answer == b.tasks[i].answer);
  }
  std::set<std::string> ids;
  for (const Task& t : a.tasks) CHECK(ids.insert(t.id).second);

  // Same seed, different split: disjoint ids and a different stream.
  TaskSet e = generate_taskset(TaskFamily::ModAdd, 50, 7, v, Split::eval, {});
  for (const Task& t : e.tasks) CHECK(ids.count(t.id) == 0);
}

TEST_CASE("verify: exact match semantics") {
  Vocab v{16};
  Task t;
  t.id = "t";
  t.family = TaskFamily::ModAdd;
  t.prompt = {14, 3, 4};
  t.answer = {7, 15};

  CHECK(verify(t, {7, 15}) == 1.0);
  CHECK(verify(t, {8, 15}) == 0.0);          // one wrong token
  CHECK(verify(t, {7}) == 0.0);              // truncated, no END
  CHECK(verify(t, {7, 15, 3, 9}) == 1.0);    // tokens after END ignored
  CHECK(verify(t, {15}) == 0.0);             // END first: empty payload
  CHECK(verify(t, {7, 7, 15}) == 0.0);       // payload too long
  CHECK(verify(t, {}) == 0.0);
}

TEST_CASE("verify: canonical answers verify to 1 for every family") {
  Vocab v{16};
  for (TaskFamily f :
       {TaskFamily::ModAdd, TaskFamily::Copy, TaskFamily::Reverse}) {
    TaskSet set = generate_taskset(f, 100, 11, v, Split::train, {});
    for (const Task& t : set.tasks) CHECK(verify(t, t.answer) == 1.0);
  }
}

TEST_CASE("generation rejects oversized modulus") {
  TaskGenOptions opts;
  opts.modulus = 15;  // vocab 16 leaves room for 14 digits at most
  CHECK_THROWS_AS(
      generate_taskset(TaskFamily::ModAdd, 5, 1, Vocab{16}, Split::train, opts),
      Error);
  CHECK_THROWS_AS(
      generate_taskset(TaskFamily::ModAdd, 0, 1, Vocab{16}, Split::train, {}),
      Error);
}

TEST_CASE("taskset file round-trip") {
  Vocab v{16};
  TaskSet set = generate_taskset(TaskFamily::Reverse, 25, 13, v, Split::eval,
                                 {});
  auto tmp = std::filesystem::temp_directory_path() / "rlep_tasks_rt.txt";
  save_taskset(set, tmp.string());
  TaskSet loaded = load_taskset(tmp.string());
  CHECK(loaded.split == set.split);
  CHECK(loaded.vocab_size == set.vocab_size);
  REQUIRE(loaded.tasks.size() == set.tasks.size());
  for (std::size_t i = 0; i < set.tasks.size(); ++i) {
    CHECK(loaded.tasks[i].id == set.tasks[i].id);
    CHECK(loaded.tasks[i].family == set.tasks[i].family);
    CHECK(loaded.tasks[i].prompt == set.tasks[i].prompt);
    CHECK(loaded.tasks[i].answer == set.tasks[i].answer);
  }
  std::filesystem::remove(tmp);
}
