#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proglearn/datasets.hpp"
#include "proglearn/proposer.hpp"
#include "proglearn/sandbox.hpp"

namespace proglearn {

inline constexpr const char* kRunRecordSchema = "runrec/1";

struct RunConfig {
  TaskSpec task;
  int n = 20;
  int m = 200;
  SplitSpec split_spec{100, 100};
  int attempts = 5;     // k
  double theta = 0.0;   // early-stop validation error threshold
  std::uint64_t data_seed = 1;
  std::uint64_t split_seed = 2;
  std::string guest_language = "Python";
  PromptTemplate prompt_template;
  ProposerConfig proposer;
  SandboxConfig sandbox;
  // Per-attempt verification allowance used for the wall-clock ceiling. Zero means
  // derive from the sandbox timeout (compile + two dataset passes, plus slack).
  double verify_budget_ms = 0.0;
};

struct RunResult {
  std::optional<Candidate> best;
  std::optional<double> err_star;
  std::vector<double> err_star_sequence;  // value after each strict improvement
  std::string stop_reason;                // early_stop | exhausted
  int attempts_used = 0;
  int proposer_calls = 0;
  double wall_ms = 0.0;
};

// Append-only line-delimited JSON log. Lines go to <path>.partial and the file only
// takes its final name once the summary is written, so a readable record is a
// complete record.
class RunRecordWriter {
 public:
  explicit RunRecordWriter(std::string path) : path_(std::move(path)) {
    if (path_.empty()) return;
    out_.open(path_ + ".partial", std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open run record: " + path_);
  }

  void event(nlohmann::json j) {
    if (!out_.is_open()) return;
    j["seq"] = seq_++;
    out_ << j.dump() << "\n";
    out_.flush();
  }

  void finalize() {
    if (!out_.is_open()) return;
    out_.close();
    std::rename((path_ + ".partial").c_str(), path_.c_str());
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  long seq_ = 0;
};

namespace detail {

inline std::string outcomes_string(const std::vector<std::optional<int>>& outcomes) {
  std::string s;
  s.reserve(outcomes.size());
  for (const auto& o : outcomes) s += !o.has_value() ? 'x' : (*o == 1 ? '1' : '0');
  return s;
}

inline nlohmann::json config_json(const RunConfig& cfg) {
  return {
      {"task", task_name(cfg.task.id)},
      {"params", task_params_string(cfg.task)},
      {"n", cfg.n},
      {"m", cfg.m},
      {"m_train", cfg.split_spec.m_train},
      {"m_val", cfg.split_spec.m_val},
      {"attempts", cfg.attempts},
      {"candidates_per_call", cfg.proposer.candidates_per_call},
      {"theta", cfg.theta},
      {"data_seed", cfg.data_seed},
      {"split_seed", cfg.split_seed},
      {"guest_language", cfg.guest_language},
      {"model", cfg.proposer.model_id},
      {"max_output_tokens", cfg.proposer.max_output_tokens},
      {"call_timeout_ms", cfg.proposer.call_timeout_ms},
      {"batch_timeout_ms", cfg.sandbox.batch_timeout_ms},
      {"driver_version", cfg.sandbox.driver_version},
  };
}

}  // namespace detail

// Propose-and-verify search: up to k proposer calls, duplicates and partial
// candidates skipped, best-by-validation kept, early stop at theta. The prompt is
// built once from the training split and reused verbatim for every attempt.
inline RunResult run_llm_erm(const RunConfig& cfg, CandidateSource& source,
                             RunRecordWriter& record) {
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  LabeledDataset pool = generate_balanced(cfg.task, cfg.n, cfg.m, cfg.data_seed, "train");
  auto [train, val] = split(pool, cfg.split_spec, cfg.split_seed);
  const std::string prompt = build_prompt(cfg.prompt_template, train, cfg.guest_language);

  record.event({{"event", "run_start"}, {"schema", kRunRecordSchema},
                {"config", detail::config_json(cfg)}});
  record.event({{"event", "prompt"}, {"text", prompt}});

  double verify_budget = cfg.verify_budget_ms > 0.0
                             ? cfg.verify_budget_ms
                             : 3.0 * cfg.sandbox.batch_timeout_ms + 1000.0;
  const double ceiling_ms =
      static_cast<double>(cfg.attempts) * (cfg.proposer.call_timeout_ms + verify_budget);

  RunResult res;
  res.stop_reason = "exhausted";
  double err_star = 1.0;
  SeenSet seen;
  int candidate_counter = 0;

  for (int attempt = 1; attempt <= cfg.attempts; ++attempt) {
    if (elapsed_ms() > ceiling_ms) {
      record.event({{"event", "budget_stop"}, {"elapsed_ms", elapsed_ms()}});
      break;
    }
    res.attempts_used = attempt;
    ++res.proposer_calls;
    auto responses = source.request(prompt);
    bool stop = false;
    for (const auto& r : responses) {
      record.event({{"event", "response"},
                    {"attempt", attempt},
                    {"status", raw_status_name(r.status)},
                    {"latency_ms", r.latency_ms},
                    {"body", r.body},
                    {"error", r.error}});
      if (r.status != RawResponse::Status::success) continue;
      ParsedCandidate parsed = parse_candidate(r.body);
      if (!parsed.ok) {
        record.event({{"event", "parse_error"}, {"attempt", attempt}, {"error", parsed.error}});
        continue;
      }
      Candidate cand = make_candidate(parsed.code);
      if (!seen.insert_if_new(cand)) {
        record.event({{"event", "duplicate_skip"},
                      {"attempt", attempt},
                      {"dedup_key", cand.dedup_key}});
        continue;
      }
      int candidate_id = candidate_counter++;
      VerificationReport rep = check_and_evaluate(cand, train, val, cfg.sandbox);
      nlohmann::json ver = {{"event", "verification"},
                            {"attempt", attempt},
                            {"candidate_id", candidate_id},
                            {"dedup_key", cand.dedup_key},
                            {"source", cand.source},
                            {"compile_ok", rep.compile_ok},
                            {"total", rep.total},
                            {"failure", guest_failure_name(rep.failure)},
                            {"wall_ms", rep.wall_ms},
                            {"train_outcomes", detail::outcomes_string(rep.train_outcomes)},
                            {"val_outcomes", detail::outcomes_string(rep.val_outcomes)}};
      if (rep.total) {
        ver["err_train"] = *rep.err_train;
        ver["err_val"] = *rep.err_val;
      }
      record.event(std::move(ver));
      if (!rep.compile_ok || !rep.total) continue;
      if (*rep.err_val < err_star) {
        err_star = *rep.err_val;
        res.best = cand;
        res.err_star = err_star;
        res.err_star_sequence.push_back(err_star);
        record.event({{"event", "improvement"},
                      {"attempt", attempt},
                      {"candidate_id", candidate_id},
                      {"dedup_key", cand.dedup_key},
                      {"err_val", err_star}});
      }
      if (err_star <= cfg.theta) {
        res.stop_reason = "early_stop";
        stop = true;
        break;
      }
    }
    if (stop) break;
  }

  res.wall_ms = elapsed_ms();
  nlohmann::json summary = {{"event", "summary"},
                            {"schema", kRunRecordSchema},
                            {"stop_reason", res.stop_reason},
                            {"attempts_used", res.attempts_used},
                            {"proposer_calls", res.proposer_calls},
                            {"pool_size", seen.size()},
                            {"wall_ms", res.wall_ms},
                            {"err_star_sequence", res.err_star_sequence}};
  if (res.best) {
    summary["best_dedup_key"] = res.best->dedup_key;
    summary["best_source"] = res.best->source;
    summary["err_star"] = *res.err_star;
  }
  record.event(std::move(summary));
  record.finalize();
  return res;
}

struct RunRecord {
  std::vector<nlohmann::json> events;

  const nlohmann::json& summary() const { return events.back(); }
};

// Strict load: every line must parse, the schema must match, and the final event
// must be the summary. A truncated or in-progress record is an error.
inline RunRecord load_run_record(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open run record: " + path);
  RunRecord rec;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("run record line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("event")) throw std::runtime_error("run record: line without event field");
    rec.events.push_back(std::move(j));
  }
  if (rec.events.empty()) throw std::runtime_error("run record: empty file");
  if (rec.events.front().value("event", "") != "run_start" ||
      rec.events.front().value("schema", "") != kRunRecordSchema)
    throw std::runtime_error("run record: missing or mismatched schema");
  if (rec.events.back().value("event", "") != "summary")
    throw std::runtime_error("run record: no summary event (incomplete run)");
  return rec;
}

struct ReplaySelection {
  std::optional<std::string> best_dedup_key;
  std::optional<double> err_star;
  std::vector<double> err_star_sequence;
};

// Recomputes the selection from the verification events alone. A well-formed record
// replays to exactly the recorded summary.
inline ReplaySelection replay_selection(const RunRecord& rec) {
  ReplaySelection out;
  double err_star = 1.0;
  for (const auto& e : rec.events) {
    if (e.value("event", "") != "verification") continue;
    if (!e.value("compile_ok", false) || !e.value("total", false)) continue;
    double err = e.at("err_val").get<double>();
    if (err < err_star) {
      err_star = err;
      out.best_dedup_key = e.at("dedup_key").get<std::string>();
      out.err_star = err;
      out.err_star_sequence.push_back(err);
    }
  }
  return out;
}

}  // namespace proglearn
