#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rlep/common.hpp"
#include "rlep/eval.hpp"
#include "rlep/grpo.hpp"
#include "rlep/policy.hpp"
#include "rlep/pool.hpp"
#include "rlep/run_log.hpp"
#include "rlep/tasks.hpp"
#include "rlep/trainer.hpp"

namespace py = pybind11;
using namespace rlep;

namespace {

// Gradients cross the boundary as {row: [per-column values]}.
py::dict grad_to_dict(const SparseGrad& g) {
  py::dict d;
  for (const auto& [row, vals] : g.rows) d[py::int_(row)] = vals;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GRPO+/RLEP training core: tiny autoregressive policy, "
            "verifiable tasks, group-relative surrogate, experience replay";
  m.attr("__version__") = kToolVersion;

  py::register_exception<Error>(m, "RlepError");

  // ----- policy -----
  py::class_<Vocab>(m, "Vocab")
      .def(py::init<int>(), py::arg("size"))
      .def_readonly("size", &Vocab::size)
      .def_property_readonly("end_token", &Vocab::end_token)
      .def_property_readonly("pad_context_id", &Vocab::pad_context_id);

  py::class_<PolicyParams>(m, "PolicyParams")
      .def_static("zeros", &PolicyParams::zeros, py::arg("vocab"),
                  py::arg("context_len"))
      .def_readonly("vocab", &PolicyParams::vocab)
      .def_readonly("context_len", &PolicyParams::context_len)
      .def_readwrite("logits", &PolicyParams::logits)
      .def_property_readonly("row_count", &PolicyParams::row_count)
      .def("context_row",
           [](const PolicyParams& p, const TokenSeq& prompt,
              const TokenSeq& response, std::size_t pos) {
             return p.context_row(prompt, response, pos);
           })
      .def("set_logit",
           [](PolicyParams& p, std::int64_t row, int col, double v) {
             p.row(row)[col] = v;
           });

  py::class_<SampledSequence>(m, "SampledSequence")
      .def_readonly("tokens", &SampledSequence::tokens)
      .def_readonly("per_token_logprob", &SampledSequence::per_token_logprob)
      .def_readonly("truncated", &SampledSequence::truncated);

  m.def("next_token_dist", &next_token_dist, py::arg("params"),
        py::arg("context"), py::arg("temperature") = 1.0,
        py::arg("top_p") = 1.0);
  m.def(
      "sample",
      [](const PolicyParams& params, const TokenSeq& prompt, int max_len,
         double temperature, double top_p, std::uint64_t seed) {
        Rng rng(seed);
        return sample(params, prompt, max_len, temperature, top_p, rng);
      },
      py::arg("params"), py::arg("prompt"), py::arg("max_len"),
      py::arg("temperature") = 1.0, py::arg("top_p") = 1.0,
      py::arg("seed") = 0);
  m.def("greedy_decode", &greedy_decode, py::arg("params"), py::arg("prompt"),
        py::arg("max_len"));
  m.def("logprob", &logprob, py::arg("params"), py::arg("prompt"),
        py::arg("response"));
  m.def(
      "grad_logprob",
      [](const PolicyParams& params, const TokenSeq& prompt,
         const TokenSeq& response) {
        return grad_to_dict(grad_logprob(params, prompt, response));
      },
      py::arg("params"), py::arg("prompt"), py::arg("response"));
  m.def("save_params", &save_params, py::arg("params"), py::arg("path"));
  m.def("load_params", &load_params, py::arg("path"));

  // ----- tasks -----
  py::enum_<TaskFamily>(m, "TaskFamily")
      .value("ModAdd", TaskFamily::ModAdd)
      .value("Copy", TaskFamily::Copy)
      .value("Reverse", TaskFamily::Reverse);
  py::enum_<Split>(m, "Split")
      .value("train", Split::train)
      .value("eval", Split::eval);

  py::class_<Task>(m, "Task")
      .def_readonly("id", &Task::id)
      .def_readonly("prompt", &Task::prompt)
      .def_readonly("answer", &Task::answer)
      .def_readonly("family", &Task::family);

  py::class_<TaskSet>(m, "TaskSet")
      .def_readonly("tasks", &TaskSet::tasks)
      .def_readonly("split", &TaskSet::split)
      .def_readonly("vocab_size", &TaskSet::vocab_size);

  py::class_<TaskGenOptions>(m, "TaskGenOptions")
      .def(py::init<>())
      .def_readwrite("modulus", &TaskGenOptions::modulus)
      .def_readwrite("payload_len", &TaskGenOptions::payload_len);

  m.def("generate_taskset", &generate_taskset, py::arg("family"),
        py::arg("count"), py::arg("seed"), py::arg("vocab"), py::arg("split"),
        py::arg("options") = TaskGenOptions{});
  m.def("verify", &verify, py::arg("task"), py::arg("response"));
  m.def("save_taskset", &save_taskset, py::arg("taskset"), py::arg("path"));
  m.def("load_taskset", &load_taskset, py::arg("path"));

  // ----- grpo core -----
  py::enum_<TrajectorySource>(m, "TrajectorySource")
      .value("fresh", TrajectorySource::fresh)
      .value("replayed", TrajectorySource::replayed);
  py::enum_<Aggregation>(m, "Aggregation")
      .value("token_mean", Aggregation::token_mean)
      .value("sequence_mean", Aggregation::sequence_mean);

  py::class_<Trajectory>(m, "Trajectory")
      .def(py::init<>())
      .def_readwrite("source", &Trajectory::source)
      .def_readwrite("tokens", &Trajectory::tokens)
      .def_readwrite("old_logprob", &Trajectory::old_logprob)
      .def_readwrite("reward", &Trajectory::reward);

  py::class_<Group>(m, "Group")
      .def(py::init<>())
      .def_readwrite("question_id", &Group::question_id)
      .def_readwrite("prompt", &Group::prompt)
      .def_readwrite("trajectories", &Group::trajectories)
      .def_readwrite("advantages", &Group::advantages);

  py::class_<ClipConfig>(m, "ClipConfig")
      .def(py::init<>())
      .def_readwrite("eps_low", &ClipConfig::eps_low)
      .def_readwrite("eps_high", &ClipConfig::eps_high)
      .def_readwrite("aggregation", &ClipConfig::aggregation);

  py::class_<TokenTerm>(m, "TokenTerm")
      .def_readonly("value", &TokenTerm::value)
      .def_readonly("grad_coeff", &TokenTerm::grad_coeff)
      .def_readonly("clipped", &TokenTerm::clipped);

  py::class_<SurrogateResult>(m, "SurrogateResult")
      .def_readonly("objective", &SurrogateResult::objective)
      .def_property_readonly(
          "grad",
          [](const SurrogateResult& r) { return grad_to_dict(r.grad); })
      .def_readonly("clip_fraction", &SurrogateResult::clip_fraction)
      .def_readonly("token_count", &SurrogateResult::token_count);

  m.def("group_advantage", &group_advantage, py::arg("rewards"),
        py::arg("degeneracy_eps") = kDegeneracyEps);
  m.def("token_ratio", &token_ratio, py::arg("new_logprob"),
        py::arg("old_logprob"));
  m.def("clipped_token_term", &clipped_token_term, py::arg("ratio"),
        py::arg("advantage"), py::arg("clip") = ClipConfig{});
  m.def("surrogate_objective", &surrogate_objective, py::arg("params"),
        py::arg("group"), py::arg("clip") = ClipConfig{});

  // ----- experience pool -----
  py::class_<ExperienceRecord>(m, "ExperienceRecord")
      .def(py::init<>())
      .def_readwrite("question_id", &ExperienceRecord::question_id)
      .def_readwrite("response_tokens", &ExperienceRecord::response_tokens)
      .def_readwrite("reward", &ExperienceRecord::reward)
      .def_readwrite("source_checkpoint", &ExperienceRecord::source_checkpoint)
      .def_readwrite("collection_step", &ExperienceRecord::collection_step);

  py::class_<ExperiencePool>(m, "ExperiencePool")
      .def(py::init<>())
      .def_readwrite("by_question", &ExperiencePool::by_question)
      .def_readwrite("min_paths", &ExperiencePool::min_paths)
      .def_property_readonly("question_count",
                             &ExperiencePool::question_count)
      .def_property_readonly("record_count", &ExperiencePool::record_count);

  py::class_<CollectStats>(m, "CollectStats")
      .def_readonly("questions_total", &CollectStats::questions_total)
      .def_readonly("questions_retained", &CollectStats::questions_retained)
      .def_readonly("candidates_sampled", &CollectStats::candidates_sampled)
      .def_readonly("verified", &CollectStats::verified)
      .def_readonly("deduped", &CollectStats::deduped)
      .def_property_readonly("coverage", &CollectStats::coverage);

  m.def(
      "collect",
      [](const PolicyParams& seed_params, const TaskSet& tasks,
         int candidates_per_question, double temperature, double top_p,
         int min_paths, std::uint64_t seed, int max_response_len,
         const std::string& source_checkpoint, long collection_step,
         int workers) {
        CollectStats stats;
        ExperiencePool pool = collect(
            seed_params, tasks, candidates_per_question, temperature, top_p,
            min_paths, seed, max_response_len, source_checkpoint,
            collection_step, &stats, workers);
        return py::make_tuple(pool, stats);
      },
      py::arg("seed_params"), py::arg("tasks"),
      py::arg("candidates_per_question") = 64, py::arg("temperature") = 0.7,
      py::arg("top_p") = 0.95, py::arg("min_paths") = 2, py::arg("seed") = 1,
      py::arg("max_response_len") = 16, py::arg("source_checkpoint") = "",
      py::arg("collection_step") = 0, py::arg("workers") = 1);
  m.def("save_pool", &save_pool, py::arg("pool"), py::arg("path"));
  m.def("load_pool", &load_pool, py::arg("path"));
  m.def("verify_pool", &verify_pool, py::arg("pool"), py::arg("tasks"));
  m.def(
      "sample_replay",
      [](const ExperiencePool& pool, const std::string& question_id, int m_,
         std::uint64_t seed) {
        Rng rng(seed);
        return sample_replay(pool, question_id, m_, rng);
      },
      py::arg("pool"), py::arg("question_id"), py::arg("m"),
      py::arg("seed") = 0);

  // ----- trainer -----
  py::enum_<Optimizer>(m, "Optimizer")
      .value("sgd", Optimizer::sgd)
      .value("adam", Optimizer::adam);
  py::enum_<ReplayMissingPolicy>(m, "ReplayMissingPolicy")
      .value("skip_replay", ReplayMissingPolicy::skip_replay)
      .value("error", ReplayMissingPolicy::error);
  py::enum_<ReplayOldLogprob>(m, "ReplayOldLogprob")
      .value("behavior", ReplayOldLogprob::behavior)
      .value("collection", ReplayOldLogprob::collection);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("g", &TrainConfig::g)
      .def_readwrite("m", &TrainConfig::m)
      .def_readwrite("prompts_per_rollout", &TrainConfig::prompts_per_rollout)
      .def_readwrite("mini_batch_prompts", &TrainConfig::mini_batch_prompts)
      .def_readwrite("total_steps", &TrainConfig::total_steps)
      .def_readwrite("max_response_len", &TrainConfig::max_response_len)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("optimizer", &TrainConfig::optimizer)
      .def_readwrite("clip", &TrainConfig::clip)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("replay_missing_policy",
                     &TrainConfig::replay_missing_policy)
      .def_readwrite("replay_old_logprob", &TrainConfig::replay_old_logprob)
      .def_readwrite("collection_checkpoint",
                     &TrainConfig::collection_checkpoint)
      .def_readwrite("warm_start_checkpoint",
                     &TrainConfig::warm_start_checkpoint)
      .def_readwrite("context_len", &TrainConfig::context_len)
      .def_readwrite("eval_every", &TrainConfig::eval_every)
      .def_readwrite("eval_samples", &TrainConfig::eval_samples)
      .def_readwrite("eval_temperature", &TrainConfig::eval_temperature)
      .def_readwrite("eval_top_p", &TrainConfig::eval_top_p)
      .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every)
      .def_readwrite("adam_beta1", &TrainConfig::adam_beta1)
      .def_readwrite("adam_beta2", &TrainConfig::adam_beta2)
      .def_readwrite("adam_eps", &TrainConfig::adam_eps)
      .def_property_readonly("updates_per_rollout",
                             &TrainConfig::updates_per_rollout)
      .def("validate", &TrainConfig::validate);

  m.def("load_train_config", &load_train_config, py::arg("path"));
  m.def("save_train_config", &save_train_config, py::arg("config"),
        py::arg("path"));

  py::class_<RunLogRow>(m, "RunLogRow")
      .def_readonly("step", &RunLogRow::step)
      .def_readonly("objective", &RunLogRow::objective)
      .def_readonly("clip_fraction", &RunLogRow::clip_fraction)
      .def_readonly("train_reward_mean", &RunLogRow::train_reward_mean)
      .def_readonly("eval_pass1", &RunLogRow::eval_pass1)
      .def_readonly("eval_majN", &RunLogRow::eval_majn);

  py::class_<RunLog>(m, "RunLog")
      .def(py::init<>())
      .def_readonly("rows", &RunLog::rows);

  m.def("save_run_log", &save_run_log, py::arg("log"), py::arg("path"));
  m.def("load_run_log", &load_run_log, py::arg("path"));

  m.def(
      "train",
      [](const TrainConfig& cfg, const TaskSet& train_tasks,
         const TaskSet& eval_tasks, const ExperiencePool* pool,
         const PolicyParams& init_params, const std::string& checkpoint_dir,
         int workers) {
        TrainOptions opts;
        opts.checkpoint_dir = checkpoint_dir;
        opts.workers = workers;
        TrainResult r =
            train(cfg, train_tasks, eval_tasks, pool, init_params, opts);
        return py::make_tuple(r.params, r.log);
      },
      py::arg("config"), py::arg("train_tasks"), py::arg("eval_tasks"),
      py::arg("pool") = nullptr, py::arg("init_params"),
      py::arg("checkpoint_dir") = "", py::arg("workers") = 1);

  // ----- eval -----
  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("pass1", &EvalReport::pass1)
      .def_readonly("avg_n", &EvalReport::avg_n)
      .def_readonly("maj_n", &EvalReport::maj_n)
      .def_readonly("n", &EvalReport::n)
      .def_readonly("step", &EvalReport::step);

  m.def("canonicalize_response", &canonicalize_response, py::arg("response"),
        py::arg("end_token"));
  m.def("majority_response", &majority_response, py::arg("canonicalized"));
  m.def("evaluate", &evaluate, py::arg("params"), py::arg("tasks"),
        py::arg("n_samples") = 32, py::arg("temperature") = 1.0,
        py::arg("top_p") = 1.0, py::arg("seed") = 0,
        py::arg("max_response_len") = 16, py::arg("workers") = 1);
  m.def("steps_to_threshold", &steps_to_threshold, py::arg("log"),
        py::arg("metric"), py::arg("threshold"));

  py::class_<RunComparison>(m, "RunComparison")
      .def_readonly("metric", &RunComparison::metric)
      .def_readonly("baseline_peak", &RunComparison::baseline_peak)
      .def_readonly("rlep_peak", &RunComparison::rlep_peak)
      .def_readonly("baseline_final", &RunComparison::baseline_final)
      .def_readonly("rlep_final", &RunComparison::rlep_final)
      .def_readonly("baseline_steps_to_own_peak",
                    &RunComparison::baseline_steps_to_own_peak)
      .def_readonly("rlep_steps_to_baseline_peak",
                    &RunComparison::rlep_steps_to_baseline_peak)
      .def_readonly("speedup", &RunComparison::speedup);

  m.def("compare_runs", &compare_runs, py::arg("baseline"), py::arg("rlep"),
        py::arg("metric") = "eval_pass1");
  m.def("save_comparison_csv", &save_comparison_csv, py::arg("comparison"),
        py::arg("path"));
}
