#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "proglearn/erm.hpp"
#include "proglearn/eval.hpp"
#include "proglearn/lfps.hpp"
#include "proglearn/mlp.hpp"
#include "proglearn/report.hpp"

namespace proglearn {

// The twelve stock settings by name. k-parity and pattern variants carry their
// parameter in the name so a plan file stays a flat string list.
inline const std::vector<std::string>& stock_task_names() {
  static const std::vector<std::string> names = {
      "full_parity",    "first_half_parity", "k_parity_3",  "k_parity_10",
      "pattern_10101010", "pattern_00111111", "palindrome",  "dyck2",
      "is_prime",       "is_prime_restricted", "ca_parity",  "sha256_parity"};
  return names;
}

inline TaskSpec stock_task(const std::string& name, int n, std::uint64_t seed) {
  if (name == "k_parity_3") return make_k_parity_task(n, 3, seed);
  if (name == "k_parity_10") return make_k_parity_task(n, 10, seed);
  if (name.rfind("pattern_", 0) == 0) return make_pattern_task(name.substr(8));
  return make_task(task_from_name(name));
}

struct ExperimentPlan {
  std::vector<std::string> tasks = stock_task_names();
  std::vector<int> lengths = {20, 25, 30, 50, 100};
  std::vector<int> dyck2_lengths = {20, 40, 60, 80, 100};
  std::vector<std::string> methods = {"lfps", "sgd"};
  int m = 200;
  int m_test = 10000;
  std::uint64_t seed = 42;
  int attempts = 5;           // llm-erm
  double theta = 0.0;
  int l_max = 6;              // lfps
  std::uint64_t step_budget = 10000;
  TrainConfig sgd;            // sgd baseline settings
  ProposerConfig proposer;
  SandboxConfig sandbox;
  int parallelism = 1;
  std::string mock_script;    // path to a JSON array of scripted response bodies
};

inline void proposer_from_json(const nlohmann::json& q, ProposerConfig& p) {
  p.endpoint = q.value("endpoint", p.endpoint);
  p.model_id = q.value("model", p.model_id);
  p.max_output_tokens = q.value("max_output_tokens", p.max_output_tokens);
  p.call_timeout_ms = q.value("call_timeout_ms", p.call_timeout_ms);
  p.candidates_per_call = q.value("candidates_per_call", p.candidates_per_call);
  p.effort_hint = q.value("effort", p.effort_hint);
}

inline void sandbox_from_json(const nlohmann::json& s, SandboxConfig& p) {
  if (s.contains("run_command"))
    p.run_command = s["run_command"].get<std::vector<std::string>>();
  if (s.contains("compile_command"))
    p.compile_command = s["compile_command"].get<std::vector<std::string>>();
  if (s.contains("env_allowlist"))
    p.env_allowlist = s["env_allowlist"].get<std::vector<std::string>>();
  p.batch_timeout_ms = s.value("batch_timeout_ms", p.batch_timeout_ms);
  p.memory_cap_bytes = s.value("memory_cap_bytes", p.memory_cap_bytes);
}

inline void sgd_from_json(const nlohmann::json& s, TrainConfig& p) {
  p.width = s.value("width", p.width);
  p.lr = s.value("lr", p.lr);
  p.epochs = s.value("epochs", p.epochs);
  p.batch = s.value("batch", p.batch);
  p.clip = s.value("clip", p.clip);
}

inline ExperimentPlan plan_from_json(const nlohmann::json& j) {
  ExperimentPlan p;
  if (j.contains("tasks")) p.tasks = j["tasks"].get<std::vector<std::string>>();
  if (j.contains("lengths")) p.lengths = j["lengths"].get<std::vector<int>>();
  if (j.contains("dyck2_lengths")) p.dyck2_lengths = j["dyck2_lengths"].get<std::vector<int>>();
  if (j.contains("methods")) p.methods = j["methods"].get<std::vector<std::string>>();
  p.m = j.value("m", p.m);
  p.m_test = j.value("m_test", p.m_test);
  p.seed = j.value("seed", p.seed);
  p.attempts = j.value("attempts", p.attempts);
  p.theta = j.value("theta", p.theta);
  p.l_max = j.value("l_max", p.l_max);
  p.step_budget = j.value("step_budget", p.step_budget);
  p.parallelism = j.value("parallelism", p.parallelism);
  p.mock_script = j.value("mock_script", p.mock_script);
  if (p.tasks.empty() || p.methods.empty())
    throw std::invalid_argument("plan needs nonempty tasks and methods");
  if (p.lengths.empty() || p.dyck2_lengths.empty())
    throw std::invalid_argument("plan needs nonempty length grids");
  if (j.contains("sgd")) sgd_from_json(j["sgd"], p.sgd);
  if (j.contains("proposer")) proposer_from_json(j["proposer"], p.proposer);
  if (j.contains("sandbox")) sandbox_from_json(j["sandbox"], p.sandbox);
  return p;
}

inline ResultCell cell_from_json(const nlohmann::json& j) {
  ResultCell cell;
  cell.task = j.at("task").get<std::string>();
  cell.n = j.at("n").get<int>();
  cell.method = j.at("method").get<std::string>();
  cell.status = j.at("status").get<std::string>();
  cell.accuracy = j.value("accuracy", 0.0);
  cell.detail = j.value("detail", "");
  cell.wall_seconds = j.value("wall_seconds", 0.0);
  return cell;
}

inline ResultCell load_cell_record(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open cell record: " + path);
  return cell_from_json(nlohmann::json::parse(in));
}

// Rebuilds a table from every persisted cell record under out_dir.
inline ResultTable load_cells(const std::string& out_dir) {
  namespace fs = std::filesystem;
  ResultTable table;
  fs::path dir = fs::path(out_dir) / "cells";
  if (!fs::exists(dir)) return table;
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) table.cells.push_back(load_cell_record(p));
  return table;
}

namespace detail {

inline std::uint64_t cell_seed(std::uint64_t plan_seed, const std::string& task, int n,
                               const std::string& role) {
  return plan_seed ^ fnv1a64(task + "|" + std::to_string(n) + "|" + role);
}

// Test sets draw from a stream tagged differently from every train/val stream.
inline LabeledDataset make_test_set(const ExperimentPlan& plan, const TaskSpec& task,
                                    const std::string& task_name_str, int n) {
  int m_test = plan.m_test;
  if (task.id == TaskId::dyck2 && n == 20) m_test = std::min(m_test, 1000);
  return generate_balanced(task, n, m_test,
                           cell_seed(plan.seed, task_name_str, n, "test"), "test");
}

}  // namespace detail

using ProposerFactory = std::function<std::unique_ptr<CandidateSource>()>;

// Runs one (task, n, method) cell and returns its table row. The run record or cell
// artifacts land in out_dir.
inline ResultCell run_cell(const ExperimentPlan& plan, const std::string& task_name_str, int n,
                           const std::string& method, const std::string& out_dir,
                           const ProposerFactory& make_proposer) {
  ResultCell cell;
  cell.task = task_name_str;
  cell.n = n;
  cell.method = method;
  auto t0 = std::chrono::steady_clock::now();
  try {
    TaskSpec task = stock_task(task_name_str, n, plan.seed);
    std::uint64_t data_seed = detail::cell_seed(plan.seed, task_name_str, n, "data");

    if (method == "lfps") {
      LabeledDataset pool = generate_balanced(task, n, plan.m, data_seed, "train");
      LfpsResult found = lfps(pool, {plan.l_max, plan.step_budget});
      if (!found.program) {
        cell.status = "failed";
        cell.detail = "no consistent program up to length " + std::to_string(plan.l_max);
      } else {
        LabeledDataset test = detail::make_test_set(plan, task, task_name_str, n);
        cell.accuracy = evaluate_on_test(
            dsl_hypothesis(*found.program, {plan.l_max, plan.step_budget}), test);
        cell.status = "ok";
        cell.detail = "program=" + *found.program +
                      " visited=" + std::to_string(found.visited);
      }
    } else if (method == "sgd") {
      LabeledDataset pool = generate_balanced(task, n, plan.m, data_seed, "train");
      TrainConfig cfg = plan.sgd;
      cfg.seed = data_seed ^ 0x5eedULL;
      MlpModel model(n, cfg.width, cfg.seed);
      TrainReport rep = train(model, pool, cfg);
      LabeledDataset test = detail::make_test_set(plan, task, task_name_str, n);
      cell.accuracy = mlp_accuracy(model, test);
      cell.status = "ok";
      cell.detail = "train_acc=" + std::to_string(rep.final_train_accuracy);
    } else if (method == "llm-erm") {
      RunConfig cfg;
      cfg.task = task;
      cfg.n = n;
      cfg.m = plan.m;
      cfg.split_spec = {plan.m / 2, plan.m - plan.m / 2};
      cfg.attempts = plan.attempts;
      cfg.theta = plan.theta;
      cfg.data_seed = data_seed;
      cfg.split_seed = detail::cell_seed(plan.seed, task_name_str, n, "split");
      cfg.proposer = plan.proposer;
      cfg.sandbox = plan.sandbox;
      std::string record_path =
          (std::filesystem::path(out_dir) /
           ("run_" + task_name_str + "_n" + std::to_string(n) + ".jsonl")).string();
      RunRecordWriter record(record_path);
      auto source = make_proposer();
      RunResult res = run_llm_erm(cfg, *source, record);
      if (!res.best) {
        cell.status = "failed";
        cell.detail = "no admissible candidate (" + res.stop_reason + ")";
      } else {
        LabeledDataset test = detail::make_test_set(plan, task, task_name_str, n);
        cell.accuracy = evaluate_on_test(guest_hypothesis(*res.best, plan.sandbox), test);
        cell.status = "ok";
        cell.detail = "stop=" + res.stop_reason +
                      " err_val=" + std::to_string(res.err_star.value_or(1.0));
      }
    } else {
      cell.status = "failed";
      cell.detail = "unknown method";
    }
  } catch (const std::exception& e) {
    cell.status = "failed";
    cell.detail = e.what();
  }
  cell.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cell;
}

inline std::string cell_record_path(const std::string& out_dir, const ResultCell& cell) {
  return (std::filesystem::path(out_dir) / "cells" /
          (cell.task + "_n" + std::to_string(cell.n) + "_" + cell.method + ".json"))
      .string();
}

struct PlanOutcome {
  ResultTable table;
  int failed_cells = 0;
  int skipped_cells = 0;  // already had a record, left untouched
};

// Worker pool over every (task, n, method) cell. Each cell persists its own record;
// cells whose record already exists are loaded instead of re-run, so an interrupted
// sweep resumes where it stopped.
inline PlanOutcome run_plan(const ExperimentPlan& plan, const std::string& out_dir,
                            const ProposerFactory& make_proposer) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "cells");

  struct CellKey {
    std::string task;
    int n;
    std::string method;
  };
  std::vector<CellKey> todo;
  for (const auto& task : plan.tasks) {
    const auto& lengths = task == "dyck2" ? plan.dyck2_lengths : plan.lengths;
    for (int n : lengths) {
      for (const auto& method : plan.methods) todo.push_back({task, n, method});
    }
  }

  PlanOutcome outcome;
  std::mutex mu;
  std::size_t next = 0;
  int workers = std::max(1, plan.parallelism);

  auto worker = [&] {
    for (;;) {
      std::size_t index;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= todo.size()) return;
        index = next++;
      }
      const auto& key = todo[index];
      ResultCell probe;
      probe.task = key.task;
      probe.n = key.n;
      probe.method = key.method;
      std::string record_path = cell_record_path(out_dir, probe);
      ResultCell cell;
      bool skipped = false;
      if (fs::exists(record_path)) {
        cell = load_cell_record(record_path);
        skipped = true;
      } else {
        cell = run_cell(plan, key.task, key.n, key.method, out_dir, make_proposer);
        nlohmann::json j = {{"task", cell.task},     {"n", cell.n},
                            {"method", cell.method}, {"status", cell.status},
                            {"accuracy", cell.accuracy}, {"detail", cell.detail},
                            {"wall_seconds", cell.wall_seconds}};
        std::ofstream out(record_path + ".partial", std::ios::binary);
        out << j.dump(2) << "\n";
        out.close();
        fs::rename(record_path + ".partial", record_path);
      }
      {
        std::lock_guard<std::mutex> lock(mu);
        outcome.table.cells.push_back(cell);
        if (cell.status == "failed") ++outcome.failed_cells;
        if (skipped) ++outcome.skipped_cells;
      }
    }
  };

  std::vector<std::thread> pool;
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return outcome;
}

// Scripted responses loaded from a JSON array file; each cell gets a fresh cursor.
inline ProposerFactory scripted_proposer_factory(const std::string& script_path, int per_call) {
  std::ifstream in(script_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open mock script: " + script_path);
  nlohmann::json j = nlohmann::json::parse(in);
  auto bodies = j.get<std::vector<std::string>>();
  return [bodies, per_call] {
    return std::unique_ptr<CandidateSource>(new ScriptedProposer(bodies, per_call));
  };
}

inline ProposerFactory http_proposer_factory(const ProposerConfig& cfg) {
  return [cfg] { return std::unique_ptr<CandidateSource>(new HttpProposer(cfg)); };
}

}  // namespace proglearn
