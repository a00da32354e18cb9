#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "rlep/common.hpp"
#include "rlep/eval.hpp"
#include "rlep/grpo.hpp"
#include "rlep/policy.hpp"
#include "rlep/pool.hpp"
#include "rlep/run_log.hpp"
#include "rlep/tasks.hpp"
#include "rlep/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_manifest(const std::string& path, const std::string& command,
                    std::uint64_t seed, const json& artifacts,
                    const json& extra = json::object()) {
  json m;
  m["tool_version"] = rlep::kToolVersion;
  m["command"] = command;
  m["seed"] = seed;
  m["artifacts"] = artifacts;
  for (auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream out(path);
  if (!out) rlep::fail("io", "cannot open for writing: " + path);
  out << m.dump(2) << "\n";
  if (!out) rlep::fail("io", "write failed: " + path);
}

void require_artifacts_exist(const json& artifacts) {
  for (auto& [k, v] : artifacts.items()) {
    if (!fs::exists(v.get<std::string>()))
      rlep::fail("io", "artifact '" + k + "' missing: " + v.get<std::string>());
  }
}

int cmd_gen_tasks(const std::string& family, int count, std::uint64_t seed,
                  int vocab_size, const std::string& split, int modulus,
                  int payload_len, const std::string& out) {
  if (count < 1) rlep::fail("validation", "--count must be >= 1");
  if (vocab_size < 4) rlep::fail("validation", "--vocab-size must be >= 4");
  rlep::TaskGenOptions opts;
  opts.modulus = modulus;
  opts.payload_len = payload_len;
  rlep::TaskSet set = rlep::generate_taskset(
      rlep::family_from_name(family), count, seed, rlep::Vocab{vocab_size},
      rlep::split_from_name(split), opts);
  rlep::save_taskset(set, out);
  json artifacts = {{"taskset", out}};
  write_manifest(out + ".manifest.json", "gen-tasks", seed, artifacts,
                 {{"family", family},
                  {"count", count},
                  {"split", split},
                  {"vocab_size", vocab_size}});
  require_artifacts_exist(artifacts);
  std::cout << "wrote " << set.tasks.size() << " " << family << " tasks ("
            << split << ") to " << out << "\n";
  return 0;
}

rlep::PolicyParams init_params_for(const rlep::TrainConfig& cfg,
                                   const rlep::TaskSet& tasks) {
  if (!cfg.warm_start_checkpoint.empty()) {
    rlep::PolicyParams p = rlep::load_params(cfg.warm_start_checkpoint);
    if (p.vocab.size != tasks.vocab_size)
      rlep::fail("config", "warm-start checkpoint vocab mismatch");
    return p;
  }
  return rlep::PolicyParams::zeros(tasks.vocab(), cfg.context_len);
}

int run_training(const std::string& command, const std::string& config_path,
                 const std::string& tasks_path, const std::string& eval_path,
                 const std::string& pool_path, const std::string& out_dir,
                 long resume_step, int workers, bool seed_given,
                 std::uint64_t seed_override) {
  rlep::TrainConfig cfg = rlep::load_train_config(config_path);
  if (seed_given) cfg.seed = seed_override;

  if (command == "train-baseline" && cfg.m != 0)
    rlep::fail("config", "train-baseline requires m = 0 in the config (got " +
                             std::to_string(cfg.m) + ")");
  if (command == "train-rlep") {
    if (cfg.m > 0 && pool_path.empty())
      rlep::fail("config", "train-rlep with m > 0 requires --pool");
    if (cfg.m == 0 && !pool_path.empty())
      std::cerr << "warning: m = 0, supplied pool will not be used\n";
  }

  rlep::TaskSet train_tasks = rlep::load_taskset(tasks_path);
  rlep::TaskSet eval_tasks = rlep::load_taskset(eval_path);

  rlep::ExperiencePool pool;
  bool have_pool = false;
  if (!pool_path.empty()) {
    pool = rlep::load_pool(pool_path);
    rlep::verify_pool(pool, train_tasks);
    have_pool = true;
  }

  fs::create_directories(out_dir);
  rlep::PolicyParams init = init_params_for(cfg, train_tasks);

  rlep::TrainOptions opts;
  opts.checkpoint_dir = out_dir;
  opts.workers = workers;

  rlep::ResumeState resume;
  if (resume_step > 0) {
    if (resume_step % cfg.updates_per_rollout() != 0)
      rlep::fail("validation",
                 "--resume step must be a multiple of updates_per_rollout (" +
                     std::to_string(cfg.updates_per_rollout()) + ")");
    resume.params = rlep::load_params(
        out_dir + "/checkpoint_step" + std::to_string(resume_step) + ".txt");
    if (cfg.optimizer == rlep::Optimizer::adam)
      resume.opt = rlep::load_optimizer_state(
          out_dir + "/optstate_step" + std::to_string(resume_step) + ".txt");
    resume.step = resume_step;
    rlep::RunLog prior = rlep::load_run_log(out_dir + "/run_log.csv");
    for (const rlep::RunLogRow& row : prior.rows)
      if (row.step <= resume_step) resume.prior_log.rows.push_back(row);
    opts.resume = &resume;
  }

  rlep::TrainResult result =
      rlep::train(cfg, train_tasks, eval_tasks, have_pool ? &pool : nullptr,
                  init, opts);

  const std::string log_path = out_dir + "/run_log.csv";
  rlep::save_run_log(result.log, log_path);
  const std::string cfg_path = out_dir + "/config.txt";
  rlep::save_train_config(cfg, cfg_path);

  json artifacts = {{"run_log", log_path},
                    {"config", cfg_path},
                    {"final_checkpoint", out_dir + "/checkpoint_final.txt"},
                    {"taskset", tasks_path},
                    {"eval_taskset", eval_path}};
  if (have_pool) artifacts["pool"] = pool_path;
  write_manifest(out_dir + "/manifest.json", command, cfg.seed, artifacts,
                 {{"total_steps", cfg.total_steps}});
  require_artifacts_exist(artifacts);

  const rlep::RunLogRow& last = result.log.rows.back();
  std::cout << command << " done: " << result.log.rows.size()
            << " updates, final eval_pass1 = "
            << (last.eval_pass1 ? rlep::format_double(*last.eval_pass1) : "-")
            << "\n";
  return 0;
}

int cmd_collect(const std::string& checkpoint, const std::string& tasks_path,
                int candidates, double temperature, double top_p,
                int min_paths, std::uint64_t seed, int max_response_len,
                long collection_step, std::string source_label,
                const std::string& out, int workers) {
  if (min_paths < 1) rlep::fail("validation", "--min-paths must be >= 1");
  if (candidates < min_paths)
    rlep::fail("validation", "--min-paths larger than --candidates");
  rlep::PolicyParams params = rlep::load_params(checkpoint);
  rlep::TaskSet tasks = rlep::load_taskset(tasks_path);
  if (params.vocab.size != tasks.vocab_size)
    rlep::fail("config", "checkpoint vocab does not match taskset");
  if (source_label.empty()) source_label = fs::path(checkpoint).filename();

  rlep::CollectStats stats;
  rlep::ExperiencePool pool = rlep::collect(
      params, tasks, candidates, temperature, top_p, min_paths, seed,
      max_response_len, source_label, collection_step, &stats, workers);
  rlep::save_pool(pool, out);

  std::cout << "retained " << stats.questions_retained << " / "
            << stats.questions_total << " questions (coverage "
            << rlep::format_double(stats.coverage()) << "), "
            << pool.record_count() << " records, " << stats.verified
            << " verified candidates, " << stats.deduped << " duplicates\n";
  if (stats.questions_retained == 0)
    std::cerr << "warning: no questions retained; pool is empty\n";

  json artifacts = {{"pool", out}};
  write_manifest(out + ".manifest.json", "collect", seed, artifacts,
                 {{"checkpoint", checkpoint},
                  {"taskset", tasks_path},
                  {"candidates", candidates},
                  {"min_paths", min_paths},
                  {"coverage", stats.coverage()}});
  require_artifacts_exist(artifacts);
  return 0;
}

int cmd_report(const std::string& baseline_path, const std::string& rlep_path,
               const std::string& metric, const std::string& out) {
  rlep::RunLog baseline = rlep::load_run_log(baseline_path);
  rlep::RunLog replay = rlep::load_run_log(rlep_path);
  rlep::RunComparison c = rlep::compare_runs(baseline, replay, metric);
  rlep::save_comparison_csv(c, out);

  auto opt_str = [](const std::optional<long>& v) {
    return v ? std::to_string(*v) : std::string("-");
  };
  std::cout << "metric: " << c.metric << "\n";
  std::cout << "              peak      final     steps-to-baseline-peak\n";
  std::cout << "  baseline    " << rlep::format_double(c.baseline_peak)
            << "  " << rlep::format_double(c.baseline_final) << "  "
            << opt_str(c.baseline_steps_to_own_peak) << "\n";
  std::cout << "  rlep        " << rlep::format_double(c.rlep_peak) << "  "
            << rlep::format_double(c.rlep_final) << "  "
            << opt_str(c.rlep_steps_to_baseline_peak) << "\n";
  std::cout << "  speedup     "
            << (c.speedup ? rlep::format_double(*c.speedup) : "-") << "\n";

  json artifacts = {{"summary", out}};
  write_manifest(out + ".manifest.json", "report", 0, artifacts,
                 {{"baseline_log", baseline_path}, {"rlep_log", rlep_path}});
  require_artifacts_exist(artifacts);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GRPO+/RLEP training pipeline on synthetic verifiable tasks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rlep::kToolVersion);

  // gen-tasks
  std::string gt_family = "modadd", gt_split = "train", gt_out;
  int gt_count = 0, gt_vocab = 16, gt_modulus = 10, gt_payload = 3;
  std::uint64_t gt_seed = 1;
  auto* gen = app.add_subcommand("gen-tasks", "Generate a synthetic taskset");
  gen->add_option("--family", gt_family, "modadd | copy | reverse");
  gen->add_option("--count", gt_count, "number of tasks")->required();
  gen->add_option("--seed", gt_seed, "generation seed");
  gen->add_option("--vocab-size", gt_vocab, "token vocabulary size");
  gen->add_option("--split", gt_split, "train | eval");
  gen->add_option("--modulus", gt_modulus, "ModAdd modulus");
  gen->add_option("--payload-len", gt_payload, "Copy/Reverse payload length");
  gen->add_option("--out", gt_out, "output taskset path")->required();

  // shared training flags
  std::string tb_config, tb_tasks, tb_eval, tb_out;
  long tb_resume = 0;
  int tb_workers = 1;
  std::uint64_t tb_seed = 0;
  auto* baseline = app.add_subcommand(
      "train-baseline", "Vanilla GRPO+ training (m = 0), the seed policy run");
  baseline->add_option("--config", tb_config)->required();
  baseline->add_option("--tasks", tb_tasks, "train taskset")->required();
  baseline->add_option("--eval-tasks", tb_eval, "eval taskset")->required();
  baseline->add_option("--out", tb_out, "output directory")->required();
  baseline->add_option("--resume", tb_resume,
                       "resume from checkpoint at this step");
  baseline->add_option("--workers", tb_workers, "decode worker threads");
  auto* tb_seed_opt = baseline->add_option("--seed", tb_seed,
                                           "override the config seed");

  std::string tr_config, tr_tasks, tr_eval, tr_pool, tr_out;
  long tr_resume = 0;
  int tr_workers = 1;
  std::uint64_t tr_seed = 0;
  auto* rlep_cmd = app.add_subcommand(
      "train-rlep", "Replay training: fresh rollouts mixed with pool replays");
  rlep_cmd->add_option("--config", tr_config)->required();
  rlep_cmd->add_option("--tasks", tr_tasks, "train taskset")->required();
  rlep_cmd->add_option("--eval-tasks", tr_eval, "eval taskset")->required();
  rlep_cmd->add_option("--pool", tr_pool, "experience pool file");
  rlep_cmd->add_option("--out", tr_out, "output directory")->required();
  rlep_cmd->add_option("--resume", tr_resume,
                       "resume from checkpoint at this step");
  rlep_cmd->add_option("--workers", tr_workers, "decode worker threads");
  auto* tr_seed_opt =
      rlep_cmd->add_option("--seed", tr_seed, "override the config seed");

  // collect
  std::string cl_checkpoint, cl_tasks, cl_out, cl_label;
  int cl_candidates = 64, cl_min_paths = 2, cl_max_len = 16, cl_workers = 1;
  double cl_temp = 0.7, cl_top_p = 0.95;
  std::uint64_t cl_seed = 1;
  long cl_step = 0;
  auto* collect_cmd = app.add_subcommand(
      "collect", "Sample candidates from a seed checkpoint and pool verified "
                 "successes");
  collect_cmd->add_option("--checkpoint", cl_checkpoint)->required();
  collect_cmd->add_option("--tasks", cl_tasks)->required();
  collect_cmd->add_option("--candidates", cl_candidates,
                          "candidates per question");
  collect_cmd->add_option("--temperature", cl_temp);
  collect_cmd->add_option("--top-p", cl_top_p);
  collect_cmd->add_option("--min-paths", cl_min_paths,
                          "distinct verified responses required per question");
  collect_cmd->add_option("--seed", cl_seed);
  collect_cmd->add_option("--max-response-len", cl_max_len);
  collect_cmd->add_option("--collection-step", cl_step,
                          "step label stored in records");
  collect_cmd->add_option("--source-label", cl_label,
                          "checkpoint label stored in records");
  collect_cmd->add_option("--out", cl_out, "output pool path")->required();
  collect_cmd->add_option("--workers", cl_workers, "decode worker threads");

  // report
  std::string rp_baseline, rp_rlep, rp_metric = "eval_pass1", rp_out;
  auto* report_cmd =
      app.add_subcommand("report", "Compare a baseline and an RLEP run log");
  report_cmd->add_option("--baseline-log", rp_baseline)->required();
  report_cmd->add_option("--rlep-log", rp_rlep)->required();
  report_cmd->add_option("--metric", rp_metric);
  report_cmd->add_option("--out", rp_out, "summary CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_tasks(gt_family, gt_count, gt_seed, gt_vocab, gt_split,
                           gt_modulus, gt_payload, gt_out);
    if (baseline->parsed())
      return run_training("train-baseline", tb_config, tb_tasks, tb_eval, "",
                          tb_out, tb_resume, tb_workers,
                          tb_seed_opt->count() > 0, tb_seed);
    if (rlep_cmd->parsed())
      return run_training("train-rlep", tr_config, tr_tasks, tr_eval, tr_pool,
                          tr_out, tr_resume, tr_workers,
                          tr_seed_opt->count() > 0, tr_seed);
    if (collect_cmd->parsed())
      return cmd_collect(cl_checkpoint, cl_tasks, cl_candidates, cl_temp,
                         cl_top_p, cl_min_paths, cl_seed, cl_max_len, cl_step,
                         cl_label, cl_out, cl_workers);
    if (report_cmd->parsed())
      return cmd_report(rp_baseline, rp_rlep, rp_metric, rp_out);
  } catch (const rlep::Error& e) {
    std::cerr << "error:" << e.category() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error:internal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
