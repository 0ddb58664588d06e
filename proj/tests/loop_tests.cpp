#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "proglearn/erm.hpp"
#include "proglearn/eval.hpp"
#include "proglearn/proposer.hpp"
#include "proglearn/report.hpp"
#include "proglearn/runner.hpp"
#include "proglearn/sandbox.hpp"

#include "test_helpers.hpp"

using namespace proglearn;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

SandboxConfig quick_sandbox(int timeout_ms = 10000) {
  SandboxConfig cfg;
  cfg.batch_timeout_ms = timeout_ms;
  return cfg;
}

const std::string kParityGuest = "def f(x):\n    return x.count('1') % 2 == 1";
const std::string kConstTrueGuest = "def f(x):\n    return True";

std::string wrap_code(const std::string& code) {
  return json{{"code", code}}.dump();
}

int count_events(const RunRecord& rec, const std::string& name) {
  int c = 0;
  for (const auto& e : rec.events) c += e.value("event", "") == name;
  return c;
}

const json* find_event(const RunRecord& rec, const std::string& name, int skip = 0) {
  for (const auto& e : rec.events) {
    if (e.value("event", "") == name && skip-- == 0) return &e;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("prompt rendering substitutes every placeholder from the training split") {
  LabeledDataset train;
  train.n = 4;
  train.samples = {{"0101", 1}, {"1111", 0}, {"0000", 0}};
  PromptTemplate tmpl;
  std::string prompt = build_prompt(tmpl, train, "Python");
  CHECK(prompt.find("{sequence_dimension}") == std::string::npos);
  CHECK(prompt.find("{guest_language_name}") == std::string::npos);
  CHECK(prompt.find("{data_block}") == std::string::npos);
  CHECK(prompt.find("length 4") != std::string::npos);
  CHECK(prompt.find("Python function f(x)") != std::string::npos);
  CHECK(prompt.find("0101 -> 1\n1111 -> 0\n0000 -> 0") != std::string::npos);
  // the literal JSON shape survives template substitution
  CHECK(prompt.find("{\"code\": \"<Python function>\"}") != std::string::npos);

  PromptTemplate custom;
  custom.text = "n={sequence_dimension} lang={guest_language_name}\n{data_block}";
  CHECK(build_prompt(custom, train, "Lua") == "n=4 lang=Lua\n0101 -> 1\n1111 -> 0\n0000 -> 0");
}

TEST_CASE("candidate extraction handles fences, chatter, and junk") {
  auto ok = parse_candidate(R"({"code": "def f(x):\n    return True"})");
  REQUIRE(ok.ok);
  CHECK(ok.code == "def f(x):\n    return True");

  auto fenced = parse_candidate("```json\n{\"code\": \"def f(x): return 1\"}\n```");
  REQUIRE(fenced.ok);
  CHECK(fenced.code == "def f(x): return 1");

  auto chatty = parse_candidate(
      "Sure, here is a solution.\n{\"code\": \"def f(x): return 0\"}\nHope that helps!");
  REQUIRE(chatty.ok);
  CHECK(chatty.code == "def f(x): return 0");

  // braces inside the code string must not confuse the object scan
  auto braces = parse_candidate(R"(text {"code": "def f(x): return {1: 2}[1] == 2"} tail)");
  REQUIRE(braces.ok);
  CHECK(braces.code == "def f(x): return {1: 2}[1] == 2");

  CHECK_FALSE(parse_candidate("no object here at all").ok);
  CHECK_FALSE(parse_candidate("{broken json]").ok);
  CHECK_FALSE(parse_candidate(R"({"notcode": "x"})").ok);
  CHECK_FALSE(parse_candidate(R"({"code": 123})").ok);
}

TEST_CASE("scripted source replays bodies then reports exhaustion") {
  ScriptedProposer src({"a", "b", "c"}, 2);
  auto first = src.request("ignored");
  REQUIRE(first.size() == 2);
  CHECK(first[0].status == RawResponse::Status::success);
  CHECK(first[0].body == "a");
  CHECK(first[1].body == "b");
  auto second = src.request("ignored");
  REQUIRE(second.size() == 2);
  CHECK(second[0].body == "c");
  CHECK(second[1].status == RawResponse::Status::transport_error);
  CHECK(second[1].error == "script exhausted");
  CHECK(src.consumed() == 3);
}

TEST_CASE("http source speaks the wire format and honors auth and retries") {
  httplib::Server svr;
  std::mutex mu;
  std::vector<json> seen_bodies;
  std::vector<std::string> seen_auth;
  std::atomic<int> hits{0};
  std::atomic<int> fail_first{0};

  svr.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    {
      std::lock_guard<std::mutex> lock(mu);
      seen_bodies.push_back(json::parse(req.body));
      seen_auth.push_back(req.get_header_value("Authorization"));
    }
    if (fail_first.fetch_sub(1) > 0) {
      res.status = 500;
      return;
    }
    res.set_content(json{{"output_text", wrap_code("def f(x): return True")}}.dump(),
                    "application/json");
  });
  svr.Post("/always500", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
  });
  svr.Post("/slow", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(json{{"output_text", "late"}}.dump(), "application/json");
  });

  int port = svr.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { svr.listen_after_bind(); });
  svr.wait_until_ready();

  std::string base = "http://127.0.0.1:" + std::to_string(port);

  SECTION("success carries the payload fields and the bearer token") {
    ::setenv("PL_TEST_TOKEN", "sesame", 1);
    ProposerConfig cfg;
    cfg.endpoint = base + "/v1/complete";
    cfg.model_id = "test-model";
    cfg.max_output_tokens = 512;
    cfg.effort_hint = "hard";
    cfg.auth_env_var = "PL_TEST_TOKEN";
    cfg.candidates_per_call = 2;
    HttpProposer prop(cfg);
    auto out = prop.request("the prompt");
    REQUIRE(out.size() == 2);
    for (const auto& r : out) {
      CHECK(r.status == RawResponse::Status::success);
      CHECK(parse_candidate(r.body).ok);
    }
    std::lock_guard<std::mutex> lock(mu);
    REQUIRE(seen_bodies.size() == 2);
    CHECK(seen_bodies[0].at("model") == "test-model");
    CHECK(seen_bodies[0].at("input") == "the prompt");
    CHECK(seen_bodies[0].at("max_output_tokens") == 512);
    CHECK(seen_bodies[0].at("effort") == "hard");
    CHECK(seen_auth[0] == "Bearer sesame");
    ::unsetenv("PL_TEST_TOKEN");
  }

  SECTION("no token in the environment means no auth header") {
    ::unsetenv("PL_TEST_TOKEN");
    ProposerConfig cfg;
    cfg.endpoint = base + "/v1/complete";
    cfg.auth_env_var = "PL_TEST_TOKEN";
    HttpProposer prop(cfg);
    auto out = prop.request("p");
    REQUIRE(out.size() == 1);
    CHECK(out[0].status == RawResponse::Status::success);
    std::lock_guard<std::mutex> lock(mu);
    CHECK(seen_auth.back().empty());
  }

  SECTION("persistent server errors burn the retry budget then fail") {
    ProposerConfig cfg;
    cfg.endpoint = base + "/always500";
    cfg.max_retries = 2;
    cfg.call_timeout_ms = 30000;
    HttpProposer prop(cfg);
    auto out = prop.request("p");
    REQUIRE(out.size() == 1);
    CHECK(out[0].status == RawResponse::Status::transport_error);
    CHECK(out[0].error == "http status 500");
    CHECK(hits.load() == 3);  // initial try plus two retries
  }

  SECTION("a transient error is retried into a success") {
    fail_first = 1;
    ProposerConfig cfg;
    cfg.endpoint = base + "/v1/complete";
    cfg.max_retries = 2;
    cfg.call_timeout_ms = 30000;
    HttpProposer prop(cfg);
    auto out = prop.request("p");
    REQUIRE(out.size() == 1);
    CHECK(out[0].status == RawResponse::Status::success);
    CHECK(hits.load() == 2);
  }

  SECTION("the call budget turns a slow backend into a timeout") {
    ProposerConfig cfg;
    cfg.endpoint = base + "/slow";
    cfg.call_timeout_ms = 300;
    cfg.candidates_per_call = 3;
    HttpProposer prop(cfg);
    auto t0 = std::chrono::steady_clock::now();
    auto out = prop.request("p");
    double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE(out.size() == 1);  // a spent budget stops the remaining candidates
    CHECK(out[0].status == RawResponse::Status::timeout);
    CHECK(ms < 1400.0);
  }

  svr.stop();
  server_thread.join();
}

TEST_CASE("endpoints without a scheme are rejected up front") {
  ProposerConfig cfg;
  cfg.endpoint = "not-a-url";
  HttpProposer prop(cfg);
  auto out = prop.request("p");
  REQUIRE(out.size() == 1);
  CHECK(out[0].status == RawResponse::Status::transport_error);
  CHECK(out[0].error.find("bad endpoint") != std::string::npos);
}

TEST_CASE("dedup keys are source digests and the seen set collapses repeats") {
  Candidate a = make_candidate(kParityGuest);
  CHECK(a.dedup_key == testref::sha256_hex(kParityGuest));
  SeenSet seen;
  CHECK(seen.insert_if_new(a));
  CHECK_FALSE(seen.insert_if_new(make_candidate(kParityGuest)));
  CHECK(seen.insert_if_new(make_candidate(kConstTrueGuest)));
  CHECK(seen.size() == 2);
}

TEST_CASE("a correct guest answers every input through the wire protocol") {
  std::vector<std::string> inputs = {"0000", "0001", "0011", "1111", "1010", "0111"};
  GuestRun run = run_guest(make_candidate(kParityGuest), inputs, quick_sandbox());
  REQUIRE(run.total);
  CHECK(run.failure == GuestFailure::none);
  CHECK(run.exit_status == 0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    REQUIRE(run.outcomes[i].has_value());
    CHECK(*run.outcomes[i] == testref::parity_loop(inputs[i]));
  }
}

TEST_CASE("the jail directory is private per run and removed afterwards") {
  testref::TempDir root;
  SandboxConfig cfg = quick_sandbox();
  cfg.jail_root = root.path.string();
  std::filesystem::path jail;
  {
    GuestSession session(make_candidate(kParityGuest), cfg);
    REQUIRE(session.compile_ok());
    jail = session.jail();
    CHECK(jail.string().rfind(root.path.string(), 0) == 0);
    CHECK(std::filesystem::exists(jail / cfg.program_filename));
  }
  CHECK_FALSE(std::filesystem::exists(jail));
}

TEST_CASE("syntax errors are caught at the compile gate") {
  VerificationReport rep;
  LabeledDataset ds;
  ds.n = 4;
  ds.samples = {{"0001", 1}, {"0010", 1}};
  rep = check_and_evaluate(make_candidate("def f(x:"), ds, ds, quick_sandbox());
  CHECK_FALSE(rep.compile_ok);
  CHECK_FALSE(rep.total);
  CHECK(rep.failure == GuestFailure::compile_error);
  CHECK_FALSE(rep.err_train.has_value());
  CHECK_FALSE(rep.err_val.has_value());
  for (const auto& o : rep.train_outcomes) CHECK_FALSE(o.has_value());
  CHECK_FALSE(rep.stderr_tail.empty());
}

TEST_CASE("an uncaught guest exception forfeits the whole batch") {
  GuestRun run = run_guest(make_candidate("def f(x):\n    raise ValueError('boom')"),
                           {"01", "10"}, quick_sandbox());
  CHECK_FALSE(run.total);
  CHECK(run.failure == GuestFailure::crash);
  CHECK(run.exit_status != 0);
  for (const auto& o : run.outcomes) CHECK_FALSE(o.has_value());
  CHECK(run.stderr_tail.find("ValueError") != std::string::npos);
}

TEST_CASE("stray prints make the output stream unusable") {
  GuestRun run = run_guest(make_candidate("print('hello')\ndef f(x):\n    return False"),
                           {"01", "10"}, quick_sandbox());
  CHECK_FALSE(run.total);
  CHECK(run.failure == GuestFailure::malformed_output);
  for (const auto& o : run.outcomes) CHECK_FALSE(o.has_value());
}

TEST_CASE("a non-halting guest is killed inside the batch deadline plus slack") {
  SandboxConfig cfg = quick_sandbox(1500);
  auto t0 = std::chrono::steady_clock::now();
  GuestRun run = run_guest(make_candidate("def f(x):\n    while True:\n        pass"),
                           {"01", "10", "11"}, cfg);
  double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  CHECK_FALSE(run.total);
  CHECK(run.failure == GuestFailure::timeout);
  CHECK(run.timed_out);
  for (const auto& o : run.outcomes) CHECK_FALSE(o.has_value());
  CHECK(ms < 1500.0 + 1000.0);
}

TEST_CASE("writes outside the jail are denied and leave no trace") {
  const char* probe_path = "/pl_escape_probe.txt";
  std::error_code ec;
  std::filesystem::remove(probe_path, ec);
  std::string escape =
      "def f(x):\n    open('/pl_escape_probe.txt', 'w').write('leak')\n    return True";
  LabeledDataset ds;
  ds.n = 2;
  ds.samples = {{"01", 1}, {"10", 0}};
  VerificationReport rep = check_and_evaluate(make_candidate(escape), ds, ds, quick_sandbox());
  CHECK(rep.compile_ok);
  CHECK_FALSE(rep.total);
  CHECK(rep.failure == GuestFailure::crash);
  CHECK_FALSE(rep.err_train.has_value());
  CHECK_FALSE(std::filesystem::exists(probe_path));

  // inside the jail the guest may scribble freely
  GuestRun ok = run_guest(
      make_candidate("def f(x):\n    open('scratch.txt', 'a').write(x)\n    return True"),
      {"01", "10"}, quick_sandbox());
  CHECK(ok.total);
}

TEST_CASE("only allowlisted environment variables reach the guest") {
  ::setenv("PL_SECRET_PROBE", "exposed", 1);
  std::string probe =
      "import os\ndef f(x):\n    return os.environ.get('PL_SECRET_PROBE') is not None";
  GuestRun hidden = run_guest(make_candidate(probe), {"01", "10"}, quick_sandbox());
  REQUIRE(hidden.total);
  CHECK(*hidden.outcomes[0] == 0);
  CHECK(*hidden.outcomes[1] == 0);

  SandboxConfig leaky = quick_sandbox();
  leaky.env_allowlist.push_back("PL_SECRET_PROBE");
  GuestRun visible = run_guest(make_candidate(probe), {"01", "10"}, leaky);
  REQUIRE(visible.total);
  CHECK(*visible.outcomes[0] == 1);
  ::unsetenv("PL_SECRET_PROBE");
}

TEST_CASE("empirical error counts disagreements and rejects undefined outcomes") {
  LabeledDataset ds;
  ds.n = 2;
  ds.samples = {{"00", 0}, {"01", 1}, {"10", 1}, {"11", 0}};
  std::vector<std::optional<int>> outcomes = {0, 1, 0, 1};
  CHECK(empirical_error(outcomes, ds) == 0.5);
  CHECK(empirical_error({0, 1, 1, 0}, ds) == 0.0);
  CHECK(empirical_error({1, 0, 0, 1}, ds) == 1.0);
  CHECK_THROWS_AS(empirical_error({0, 1}, ds), std::invalid_argument);
  CHECK_THROWS_AS(empirical_error({}, LabeledDataset{}), std::invalid_argument);
  std::vector<std::optional<int>> holey = {0, std::nullopt, 1, 0};
  CHECK_THROWS_AS(empirical_error(holey, ds), std::invalid_argument);
}

TEST_CASE("verification scores guests on both splits through separate passes") {
  TaskSpec task = make_task(TaskId::full_parity);
  LabeledDataset pool = generate_balanced(task, 8, 40, 3, "train");
  auto [train, val] = split(pool, {20, 20}, 4);

  VerificationReport perfect =
      check_and_evaluate(make_candidate(kParityGuest), train, val, quick_sandbox());
  REQUIRE(perfect.total);
  CHECK(*perfect.err_train == 0.0);
  CHECK(*perfect.err_val == 0.0);

  // first-bit rule, scored independently in the host for a cross-check
  std::string first_bit = "def f(x):\n    return x[0] == '1'";
  VerificationReport rep =
      check_and_evaluate(make_candidate(first_bit), train, val, quick_sandbox());
  REQUIRE(rep.total);
  long train_wrong = 0, val_wrong = 0;
  for (const auto& s : train.samples) train_wrong += (s.input[0] == '1' ? 1 : 0) != s.label;
  for (const auto& s : val.samples) val_wrong += (s.input[0] == '1' ? 1 : 0) != s.label;
  CHECK(*rep.err_train == static_cast<double>(train_wrong) / 20.0);
  CHECK(*rep.err_val == static_cast<double>(val_wrong) / 20.0);
}

namespace {

RunConfig scenario_config(int attempts, double theta = 0.0, int timeout_ms = 10000) {
  RunConfig cfg;
  cfg.task = make_task(TaskId::full_parity);
  cfg.n = 8;
  cfg.m = 40;
  cfg.split_spec = {20, 20};
  cfg.attempts = attempts;
  cfg.theta = theta;
  cfg.data_seed = 3;
  cfg.split_seed = 4;
  cfg.sandbox.batch_timeout_ms = timeout_ms;
  return cfg;
}

}  // namespace

TEST_CASE("search stops early the moment a candidate hits the threshold") {
  testref::TempDir dir;
  RunConfig cfg = scenario_config(5);
  ScriptedProposer source({"no json in this reply", wrap_code(kParityGuest)}, 1);
  RunRecordWriter record(dir.file("run.jsonl"));
  RunResult res = run_llm_erm(cfg, source, record);

  CHECK(res.stop_reason == "early_stop");
  CHECK(res.attempts_used == 2);
  CHECK(res.proposer_calls == 2);
  REQUIRE(res.best.has_value());
  CHECK(res.best->dedup_key == testref::sha256_hex(kParityGuest));
  CHECK(res.err_star == 0.0);
  CHECK(res.err_star_sequence == std::vector<double>{0.0});

  CHECK_FALSE(std::filesystem::exists(dir.file("run.jsonl.partial")));
  RunRecord rec = load_run_record(dir.file("run.jsonl"));
  CHECK(rec.events.front().at("seq") == 0);
  CHECK(rec.summary().at("seq") == static_cast<long>(rec.events.size()) - 1);
  CHECK(count_events(rec, "parse_error") == 1);
  CHECK(count_events(rec, "verification") == 1);
  CHECK(count_events(rec, "improvement") == 1);
  CHECK(rec.summary().at("stop_reason") == "early_stop");
  CHECK(rec.summary().at("best_dedup_key") == res.best->dedup_key);

  // the recorded prompt is exactly the one rendered from the training split
  LabeledDataset pool = generate_balanced(cfg.task, cfg.n, cfg.m, cfg.data_seed, "train");
  auto [train, val] = split(pool, cfg.split_spec, cfg.split_seed);
  const json* prompt = find_event(rec, "prompt");
  REQUIRE(prompt != nullptr);
  CHECK(prompt->at("text") == build_prompt(cfg.prompt_template, train, cfg.guest_language));

  ReplaySelection replay = replay_selection(rec);
  CHECK(replay.best_dedup_key == res.best->dedup_key);
  CHECK(replay.err_star == 0.0);
  CHECK(replay.err_star_sequence == res.err_star_sequence);
}

TEST_CASE("exhausted search keeps the best by validation across failures") {
  testref::TempDir dir;
  RunConfig cfg = scenario_config(5, 0.0, 2000);

  // wrong exactly on validation inputs that start with 11, so the host can score it
  std::string prefix_flip =
      "def f(x):\n    p = x.count('1') % 2 == 1\n    return (not p) if x.startswith('11') else p";
  ScriptedProposer source(
      {wrap_code(kConstTrueGuest),
       wrap_code("def f(x):\n    while True:\n        pass"),
       wrap_code(prefix_flip),
       wrap_code(kConstTrueGuest),
       wrap_code("def f(x:")},
      1);
  RunRecordWriter record(dir.file("run.jsonl"));
  RunResult res = run_llm_erm(cfg, source, record);

  LabeledDataset pool = generate_balanced(cfg.task, cfg.n, cfg.m, cfg.data_seed, "train");
  auto [train, val] = split(pool, cfg.split_spec, cfg.split_seed);
  long flip_wrong = 0;
  for (const auto& s : val.samples) {
    int pred = testref::parity_loop(s.input);
    if (s.input.rfind("11", 0) == 0) pred = 1 - pred;
    flip_wrong += pred != s.label;
  }
  double flip_err = static_cast<double>(flip_wrong) / 20.0;
  REQUIRE(flip_err > 0.0);
  REQUIRE(flip_err < 0.5);

  CHECK(res.stop_reason == "exhausted");
  CHECK(res.attempts_used == 5);
  CHECK(res.proposer_calls == 5);
  REQUIRE(res.best.has_value());
  CHECK(res.best->dedup_key == testref::sha256_hex(prefix_flip));
  CHECK(res.err_star == flip_err);
  CHECK(res.err_star_sequence == std::vector<double>{0.5, flip_err});

  RunRecord rec = load_run_record(dir.file("run.jsonl"));
  CHECK(count_events(rec, "duplicate_skip") == 1);
  CHECK(count_events(rec, "verification") == 4);
  bool saw_timeout = false, saw_compile_error = false;
  for (const auto& e : rec.events) {
    if (e.value("event", "") != "verification") continue;
    std::string failure = e.value("failure", "");
    if (failure == "timeout") {
      saw_timeout = true;
      CHECK_FALSE(e.at("total").get<bool>());
      CHECK_FALSE(e.contains("err_val"));
    }
    if (failure == "compile_error") saw_compile_error = true;
  }
  CHECK(saw_timeout);
  CHECK(saw_compile_error);

  ReplaySelection replay = replay_selection(rec);
  CHECK(replay.best_dedup_key == res.best->dedup_key);
  CHECK(replay.err_star_sequence == res.err_star_sequence);
}

TEST_CASE("a run with no admissible candidate still finishes with a clean record") {
  testref::TempDir dir;
  RunConfig cfg = scenario_config(4);
  ScriptedProposer source(
      {"plain chatter", R"({"code": 123})", R"({"notcode": "x"})"}, 1);
  RunRecordWriter record(dir.file("run.jsonl"));
  RunResult res = run_llm_erm(cfg, source, record);

  CHECK(res.stop_reason == "exhausted");
  CHECK(res.attempts_used == 4);
  CHECK_FALSE(res.best.has_value());
  CHECK_FALSE(res.err_star.has_value());
  CHECK(res.err_star_sequence.empty());

  RunRecord rec = load_run_record(dir.file("run.jsonl"));
  CHECK(count_events(rec, "verification") == 0);
  CHECK(count_events(rec, "parse_error") == 3);
  CHECK(rec.summary().at("pool_size") == 0);
  CHECK_FALSE(rec.summary().contains("best_dedup_key"));

  // the script ran dry on the fourth attempt and the record shows it
  bool saw_exhaustion = false;
  for (const auto& e : rec.events) {
    if (e.value("event", "") == "response" &&
        e.value("status", "") == "transport_error" &&
        e.value("error", "") == "script exhausted")
      saw_exhaustion = true;
  }
  CHECK(saw_exhaustion);

  ReplaySelection replay = replay_selection(rec);
  CHECK_FALSE(replay.best_dedup_key.has_value());
}

TEST_CASE("truncated records are rejected instead of replayed") {
  testref::TempDir dir;
  RunConfig cfg = scenario_config(1);
  ScriptedProposer source({wrap_code(kParityGuest)}, 1);
  RunRecordWriter record(dir.file("run.jsonl"));
  run_llm_erm(cfg, source, record);

  std::string full = slurp(dir.file("run.jsonl"));
  auto cut = full.rfind("{\"event\":\"summary\"");
  if (cut == std::string::npos) cut = full.rfind("\"event\":\"summary\"");
  REQUIRE(cut != std::string::npos);
  auto line_start = full.rfind('\n', cut);
  REQUIRE(line_start != std::string::npos);
  std::ofstream out(dir.file("cut.jsonl"), std::ios::binary);
  out << full.substr(0, line_start + 1);
  out.close();
  CHECK_THROWS_WITH(load_run_record(dir.file("cut.jsonl")),
                    Catch::Matchers::ContainsSubstring("no summary"));

  std::ofstream empty(dir.file("empty.jsonl"), std::ios::binary);
  empty.close();
  CHECK_THROWS(load_run_record(dir.file("empty.jsonl")));
  std::ofstream bad(dir.file("bad.jsonl"), std::ios::binary);
  bad << "not json\n";
  bad.close();
  CHECK_THROWS(load_run_record(dir.file("bad.jsonl")));
  CHECK_THROWS(load_run_record(dir.file("missing.jsonl")));
}

TEST_CASE("a pathless record writer swallows events quietly") {
  RunRecordWriter sink("");
  sink.event({{"event", "x"}});
  sink.finalize();
  CHECK(sink.path().empty());
}

TEST_CASE("test accuracy is exact for known hypotheses") {
  TaskSpec task = make_task(TaskId::full_parity);
  // odd length, so flipping every bit flips the parity
  LabeledDataset test = generate_balanced(task, 9, 400, 9, "test");

  CHECK(evaluate_on_test(dsl_hypothesis("IP"), test) == 1.0);
  CHECK(evaluate_on_test(dsl_hypothesis("I~P"), test) == 0.0);
  CHECK(evaluate_on_test(guest_hypothesis(make_candidate(kConstTrueGuest), quick_sandbox()),
                         test) == 0.5);
  CHECK(evaluate_on_test(guest_hypothesis(make_candidate(kParityGuest), quick_sandbox()),
                         test) == 1.0);

  CHECK_THROWS_AS(evaluate_on_test(dsl_hypothesis("IP"), LabeledDataset{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(evaluate_on_test(dsl_hypothesis("&&"), test), std::invalid_argument);
  // a starved step budget leaves outcomes undefined, which is not a score
  CHECK_THROWS_AS(evaluate_on_test(dsl_hypothesis("IP", {6, 3}), test), std::runtime_error);
}

TEST_CASE("length probes separate true invariance from lucky fits") {
  TaskSpec task = make_task(TaskId::full_parity);

  InvarianceProfile exact =
      dimension_invariance_eval(dsl_hypothesis("IP"), task, 6, {}, 60);
  CHECK(exact.verdict == InvarianceProfile::Verdict::invariant_exact);
  REQUIRE(exact.points.size() == 4);  // 6, 12, 30, 200
  CHECK(exact.points.front().n == 6);
  CHECK(exact.points.back().n == 200);
  for (const auto& p : exact.points) {
    CHECK(p.total);
    CHECK(p.accuracy == 1.0);
    CHECK(p.m == 60);
  }

  InvarianceProfile partial =
      dimension_invariance_eval(dsl_hypothesis("I<P"), task, 6, {6, 12}, 60);
  CHECK(partial.verdict == InvarianceProfile::Verdict::partial);
  for (const auto& p : partial.points) {
    CHECK(p.total);
    CHECK(p.accuracy < 1.0);
  }

  // the step budget covers n=6 but starves n=12, so longer inputs go undefined
  InvarianceProfile bound =
      dimension_invariance_eval(dsl_hypothesis("IP", {6, 12}), task, 6, {6, 12}, 60);
  CHECK(bound.verdict == InvarianceProfile::Verdict::length_bound);
  REQUIRE(bound.points.size() == 2);
  CHECK(bound.points[0].total);
  CHECK(bound.points[0].accuracy == 1.0);
  CHECK_FALSE(bound.points[1].total);

  // infeasible probe lengths drop out; all infeasible is an error
  InvarianceProfile thin = dimension_invariance_eval(dsl_hypothesis("IP"), task, 2, {2, 20}, 100);
  REQUIRE(thin.points.size() == 1);
  CHECK(thin.points[0].n == 20);
  CHECK_THROWS_AS(dimension_invariance_eval(dsl_hypothesis("IP"), task, 2, {2, 3}, 100),
                  std::runtime_error);
}

TEST_CASE("tables render sorted, stable, and escaped") {
  ResultTable table;
  table.cells.push_back({"zeta", 20, "sgd", "ok", 0.75, "plain", 1.5});
  table.cells.push_back({"alpha", 30, "lfps", "ok", 1.0, "has, comma", 0.25});
  table.cells.push_back({"alpha", 20, "lfps", "failed", 0.0, "quote \" inside", 2.0});
  table.cells.push_back({"alpha", 20, "sgd", "ok", 0.5, "", 0.1});

  std::string text = render_table_text(table);
  auto alpha20l = text.find("alpha                20   lfps");
  auto alpha20s = text.find("alpha                20   sgd");
  auto alpha30 = text.find("alpha                30   lfps");
  auto zeta = text.find("zeta");
  REQUIRE(alpha20l != std::string::npos);
  CHECK(alpha20l < alpha20s);
  CHECK(alpha20s < alpha30);
  CHECK(alpha30 < zeta);
  CHECK(text.find("failed  -") != std::string::npos);
  CHECK(render_table_text(table) == text);

  std::string csv = render_table_csv(table);
  CHECK(csv.rfind("task,n,method,status,accuracy,wall_seconds,detail\n", 0) == 0);
  CHECK(csv.find("\"has, comma\"") != std::string::npos);
  CHECK(csv.find("\"quote \"\" inside\"") != std::string::npos);
  CHECK(csv.find("alpha,20,lfps,failed,,2.000") != std::string::npos);

  std::string svg = render_accuracy_svg(table, "alpha");
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("lfps") != std::string::npos);
  CHECK(svg.find("sgd") != std::string::npos);
  CHECK(render_accuracy_svg(table, "alpha") == svg);
  CHECK(render_accuracy_svg(table, "nosuch").find("no data") != std::string::npos);
}

TEST_CASE("report emission is reproducible byte for byte") {
  ResultTable table;
  table.cells.push_back({"alpha", 20, "lfps", "ok", 1.0, "program=IP", 0.5});
  table.cells.push_back({"alpha", 40, "lfps", "ok", 0.75, "", 0.5});

  testref::TempDir dir;
  std::string out = (dir.path / "report").string();
  emit_report(table, out);
  std::string txt1 = slurp(std::filesystem::path(out) / "table.txt");
  std::string csv1 = slurp(std::filesystem::path(out) / "table.csv");
  std::string svg1 = slurp(std::filesystem::path(out) / "plot_alpha.svg");
  emit_report(table, out);
  CHECK(slurp(std::filesystem::path(out) / "table.txt") == txt1);
  CHECK(slurp(std::filesystem::path(out) / "table.csv") == csv1);
  CHECK(slurp(std::filesystem::path(out) / "plot_alpha.svg") == svg1);

  std::string empty_out = (dir.path / "empty").string();
  emit_report(ResultTable{}, empty_out);
  CHECK(slurp(std::filesystem::path(empty_out) / "table.txt").find("no data") !=
        std::string::npos);
  CHECK_FALSE(std::filesystem::exists(std::filesystem::path(empty_out) / "table.csv"));
}

TEST_CASE("plans parse from json with defaults and validation") {
  ExperimentPlan defaults = plan_from_json(json::object());
  CHECK(defaults.tasks == stock_task_names());
  CHECK(defaults.lengths == std::vector<int>{20, 25, 30, 50, 100});
  CHECK(defaults.m == 200);

  json j = {{"tasks", {"full_parity"}},
            {"lengths", {6, 8}},
            {"methods", {"lfps"}},
            {"m", 40},
            {"m_test", 100},
            {"seed", 7},
            {"sgd", {{"width", 32}, {"epochs", 10}}},
            {"proposer", {{"endpoint", "http://x/y"}, {"candidates_per_call", 3}}},
            {"sandbox", {{"batch_timeout_ms", 1234}}}};
  ExperimentPlan p = plan_from_json(j);
  CHECK(p.tasks == std::vector<std::string>{"full_parity"});
  CHECK(p.lengths == std::vector<int>{6, 8});
  CHECK(p.m == 40);
  CHECK(p.seed == 7);
  CHECK(p.sgd.width == 32);
  CHECK(p.sgd.epochs == 10);
  CHECK(p.proposer.endpoint == "http://x/y");
  CHECK(p.proposer.candidates_per_call == 3);
  CHECK(p.sandbox.batch_timeout_ms == 1234);

  CHECK_THROWS_AS(plan_from_json({{"tasks", json::array()}}), std::invalid_argument);
  CHECK_THROWS_AS(plan_from_json({{"methods", json::array()}}), std::invalid_argument);
  CHECK_THROWS_AS(plan_from_json({{"lengths", json::array()}}), std::invalid_argument);
}

TEST_CASE("stock task names cover every variant and reject strangers") {
  CHECK(stock_task_names().size() == 12);
  for (const auto& name : stock_task_names()) CHECK_NOTHROW(stock_task(name, 20, 1));
  TaskSpec k3 = stock_task("k_parity_3", 20, 1);
  CHECK(k3.indices.size() == 3);
  CHECK(oracle_label(k3, "11100000000000000000") == 
        label_k_parity("11100000000000000000", k3.indices));
  TaskSpec pat = stock_task("pattern_10101010", 20, 1);
  CHECK(pat.pattern == "10101010");
  CHECK_THROWS(stock_task("no_such_task", 20, 1));
}

TEST_CASE("cell seeds differ across tasks, lengths, and roles") {
  std::uint64_t base = 42;
  auto s = [&](const std::string& t, int n, const std::string& r) {
    return detail::cell_seed(base, t, n, r);
  };
  CHECK(s("a", 20, "data") != s("a", 20, "split"));
  CHECK(s("a", 20, "data") != s("a", 20, "test"));
  CHECK(s("a", 20, "data") != s("a", 25, "data"));
  CHECK(s("a", 20, "data") != s("b", 20, "data"));
  CHECK(s("a", 20, "data") == s("a", 20, "data"));
}

TEST_CASE("a sweep runs every cell, persists it, and resumes without recomputing") {
  testref::TempDir dir;
  ExperimentPlan plan;
  plan.tasks = {"full_parity"};
  plan.lengths = {8, 10};
  plan.methods = {"lfps"};
  plan.m = 40;
  plan.m_test = 100;
  plan.seed = 42;

  ProposerFactory none = [] { return std::unique_ptr<CandidateSource>(); };
  PlanOutcome first = run_plan(plan, dir.path.string(), none);
  CHECK(first.table.cells.size() == 2);
  CHECK(first.failed_cells == 0);
  CHECK(first.skipped_cells == 0);
  for (const auto& cell : first.table.cells) {
    CHECK(cell.status == "ok");
    CHECK(cell.accuracy == 1.0);
    CHECK(cell.detail.find("program=IP") != std::string::npos);
    CHECK(std::filesystem::exists(cell_record_path(dir.path.string(), cell)));
  }

  std::string record = slurp(cell_record_path(dir.path.string(), first.table.cells[0]));
  PlanOutcome second = run_plan(plan, dir.path.string(), none);
  CHECK(second.skipped_cells == 2);
  CHECK(second.failed_cells == 0);
  CHECK(slurp(cell_record_path(dir.path.string(), first.table.cells[0])) == record);

  ResultTable loaded = load_cells(dir.path.string());
  REQUIRE(loaded.cells.size() == 2);
  CHECK(loaded.cells[0].task == "full_parity");
  CHECK(loaded.cells[0].accuracy == 1.0);
  CHECK(load_cells((dir.path / "nowhere").string()).cells.empty());
}

TEST_CASE("one failing cell does not poison the rest of the sweep") {
  testref::TempDir dir;
  ExperimentPlan plan;
  plan.tasks = {"full_parity"};
  plan.lengths = {6, 8};
  plan.methods = {"lfps"};
  plan.m = 40;
  plan.m_test = 100;
  plan.l_max = 1;  // nothing valid fits in one token, so every search fails
  ProposerFactory none = [] { return std::unique_ptr<CandidateSource>(); };
  PlanOutcome outcome = run_plan(plan, dir.path.string(), none);
  CHECK(outcome.failed_cells == 2);
  for (const auto& cell : outcome.table.cells) {
    CHECK(cell.status == "failed");
    CHECK(cell.detail.find("no consistent program") != std::string::npos);
  }

  // an infeasible dataset request fails its own cell the same isolated way
  ExperimentPlan tight;
  tight.tasks = {"full_parity"};
  tight.lengths = {3};
  tight.methods = {"lfps"};
  tight.m = 100;
  PlanOutcome infeasible = run_plan(tight, (dir.path / "b").string(), none);
  CHECK(infeasible.failed_cells == 1);
  CHECK(infeasible.table.cells[0].status == "failed");
}

TEST_CASE("the scripted factory gives every cell a fresh cursor") {
  testref::TempDir dir;
  std::ofstream script(dir.file("script.json"), std::ios::binary);
  script << json(std::vector<std::string>{wrap_code(kParityGuest)}).dump();
  script.close();

  ProposerFactory factory = scripted_proposer_factory(dir.file("script.json"), 1);
  auto a = factory();
  auto b = factory();
  CHECK(a->request("p")[0].status == RawResponse::Status::success);
  CHECK(b->request("p")[0].status == RawResponse::Status::success);

  CHECK_THROWS(scripted_proposer_factory(dir.file("missing.json"), 1));
}

TEST_CASE("a mock-driven search sweep lands test accuracy in the table") {
  testref::TempDir dir;
  ExperimentPlan plan;
  plan.tasks = {"full_parity"};
  plan.lengths = {8};
  plan.methods = {"llm-erm"};
  plan.m = 40;
  plan.m_test = 200;
  plan.attempts = 2;

  std::ofstream script(dir.file("script.json"), std::ios::binary);
  script << json(std::vector<std::string>{wrap_code(kParityGuest)}).dump();
  script.close();
  ProposerFactory factory = scripted_proposer_factory(dir.file("script.json"), 1);

  PlanOutcome outcome = run_plan(plan, dir.path.string(), factory);
  REQUIRE(outcome.table.cells.size() == 1);
  const ResultCell& cell = outcome.table.cells[0];
  CHECK(cell.status == "ok");
  CHECK(cell.accuracy == 1.0);
  CHECK(cell.detail.find("stop=early_stop") != std::string::npos);

  RunRecord rec = load_run_record((dir.path / "run_full_parity_n8.jsonl").string());
  CHECK(rec.summary().value("stop_reason", "") == "early_stop");
}
