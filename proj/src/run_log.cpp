#include "rlep/run_log.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace rlep {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void RunLog::check_metric_name(const std::string& name) {
  if (name != "objective" && name != "clip_fraction" &&
      name != "train_reward_mean" && name != "eval_pass1" &&
      name != "eval_majN")
    fail("config", "unknown metric column '" + name + "'");
}

std::optional<double> RunLog::metric(const RunLogRow& row,
                                     const std::string& name) {
  if (name == "objective") return row.objective;
  if (name == "clip_fraction") return row.clip_fraction;
  if (name == "train_reward_mean") return row.train_reward_mean;
  if (name == "eval_pass1") return row.eval_pass1;
  if (name == "eval_majN") return row.eval_majn;
  fail("config", "unknown metric column '" + name + "'");
}

void save_run_log(const RunLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot open for writing: " + path);
  out << kRunLogHeader << "\n";
  for (const RunLogRow& r : log.rows) {
    out << r.step << ',' << format_double(r.objective) << ','
        << format_double(r.clip_fraction) << ','
        << format_double(r.train_reward_mean) << ',';
    if (r.eval_pass1) out << format_double(*r.eval_pass1);
    out << ',';
    if (r.eval_majn) out << format_double(*r.eval_majn);
    out << '\n';
  }
  if (!out) fail("io", "write failed: " + path);
}

RunLog load_run_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) fail("schema", "empty run log: " + path);
  if (line != kRunLogHeader)
    fail("schema", "run log column mismatch in " + path + ": got '" + line +
                       "', expected '" + kRunLogHeader + "'");
  RunLog log;
  int line_no = 1;
  long prev_step = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      std::size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (fields.size() != 6)
      fail("schema", path + ":" + std::to_string(line_no) +
                         ": expected 6 columns, got " +
                         std::to_string(fields.size()));
    auto num = [&](const std::string& s) {
      char* endp = nullptr;
      double v = std::strtod(s.c_str(), &endp);
      if (endp == s.c_str() || *endp != '\0')
        fail("schema", path + ":" + std::to_string(line_no) +
                           ": bad number '" + s + "'");
      return v;
    };
    RunLogRow row;
    row.step = static_cast<long>(num(fields[0]));
    row.objective = num(fields[1]);
    row.clip_fraction = num(fields[2]);
    row.train_reward_mean = num(fields[3]);
    if (!fields[4].empty()) row.eval_pass1 = num(fields[4]);
    if (!fields[5].empty()) row.eval_majn = num(fields[5]);
    if (row.step <= prev_step)
      fail("schema", path + ":" + std::to_string(line_no) +
                         ": steps must be strictly increasing");
    prev_step = row.step;
    log.rows.push_back(row);
  }
  return log;
}

}  // namespace rlep
