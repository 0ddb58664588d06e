// Command-line surface for the program-learning workbench. Verbs:
//   gen     generate a balanced labeled dataset
//   split   split a dataset into train/validation files
//   lfps    length-first program search over a dataset
//   erm     propose-and-verify loop against an LLM backend (or a scripted mock)
//   sgd     MLP baseline training and evaluation
//   theory  bound calculators and exact audits
//   eval    evaluate a hypothesis on a test set, optionally probing invariance
//   sweep   run an experiment plan grid with per-cell records
//   report  render persisted cell records into table + plot artifacts
//
// Exit codes: 0 all requested work succeeded, 2 partial failures (cells failed,
// nothing consistent found, hypothesis not total), 1 configuration or usage error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "proglearn/bounds.hpp"
#include "proglearn/datasets.hpp"
#include "proglearn/erm.hpp"
#include "proglearn/eval.hpp"
#include "proglearn/lfps.hpp"
#include "proglearn/mlp.hpp"
#include "proglearn/proposer.hpp"
#include "proglearn/report.hpp"
#include "proglearn/runner.hpp"
#include "proglearn/sandbox.hpp"
#include "proglearn/tasks.hpp"
#include "proglearn/theory.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace proglearn;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kPartialFailure = 2;

struct GlobalOpts {
  std::string config;
  std::uint64_t seed = 42;
  std::string mock_proposer;
  std::string out_dir = "out";
};

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return json::parse(in);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

TaskSpec build_task(const std::string& name, int n, std::uint64_t seed, int k,
                    const std::string& pattern) {
  if (!pattern.empty()) return make_pattern_task(pattern);
  if (k > 0) return make_k_parity_task(n, k, seed);
  if (name == "k_parity") throw CLI::ValidationError("--task k_parity requires --k");
  if (name == "pattern_match")
    throw CLI::ValidationError("--task pattern_match requires --pattern");
  return stock_task(name, n, seed);
}

struct GenOpts {
  std::string task;
  int n = 20;
  int m = 200;
  std::string role = "train";
  int k = 0;
  std::string pattern;
  std::string file;
};

int run_gen(const GlobalOpts& g, const GenOpts& o) {
  TaskSpec task = build_task(o.task, o.n, g.seed, o.k, o.pattern);
  LabeledDataset ds = generate_balanced(task, o.n, o.m, g.seed, o.role);
  std::string path = o.file;
  if (path.empty()) {
    fs::create_directories(g.out_dir);
    path = (fs::path(g.out_dir) / (o.task + "_n" + std::to_string(o.n) + "_m" +
                                   std::to_string(o.m) + "_" + o.role + ".txt"))
               .string();
  }
  save_dataset(ds, path);
  std::cout << "wrote " << ds.samples.size() << " samples to " << path << "\n";
  return kOk;
}

struct SplitOpts {
  std::string in_path;
  int m_train = 0;
  int m_val = 0;
  std::string train_out;
  std::string val_out;
};

int run_split(const GlobalOpts& g, const SplitOpts& o) {
  LabeledDataset pool = load_dataset(o.in_path);
  int m = static_cast<int>(pool.samples.size());
  SplitSpec spec{o.m_train > 0 ? o.m_train : m / 2, o.m_val > 0 ? o.m_val : m - m / 2};
  auto [train, val] = split(pool, spec, g.seed);
  fs::create_directories(g.out_dir);
  std::string train_path =
      o.train_out.empty() ? (fs::path(g.out_dir) / "train.txt").string() : o.train_out;
  std::string val_path =
      o.val_out.empty() ? (fs::path(g.out_dir) / "val.txt").string() : o.val_out;
  save_dataset(train, train_path);
  save_dataset(val, val_path);
  std::cout << "wrote " << train.samples.size() << " train samples to " << train_path << "\n"
            << "wrote " << val.samples.size() << " validation samples to " << val_path << "\n";
  return kOk;
}

struct LfpsOpts {
  std::string train;
  std::string test;
  int l_max = 6;
  std::uint64_t step_budget = 10000;
};

int run_lfps(const GlobalOpts&, const LfpsOpts& o) {
  LabeledDataset data = load_dataset(o.train);
  EnumConfig cfg{o.l_max, o.step_budget};
  LfpsResult res = lfps(data, cfg);
  std::cout << "visited " << res.visited << " strings, evaluated " << res.evaluated
            << " programs in " << std::fixed << std::setprecision(3) << res.wall_seconds
            << " s\n";
  if (!res.program) {
    std::cout << "no consistent program up to length " << o.l_max << "\n";
    return kPartialFailure;
  }
  std::cout << "program " << *res.program << " (length " << res.program_length << ")\n";
  if (!o.test.empty()) {
    LabeledDataset test = load_dataset(o.test);
    double acc = evaluate_on_test(dsl_hypothesis(*res.program, cfg), test);
    std::cout << "test accuracy " << std::setprecision(6) << acc << "\n";
  }
  return kOk;
}

struct ErmOpts {
  std::string task;
  int n = 20;
  int m = 200;
  int k = 0;
  std::string pattern;
  int attempts = 5;
  double theta = 0.0;
  std::string record;
  std::string test;
  std::string endpoint;
  std::string model;
  int call_timeout_ms = 20 * 60 * 1000;
  int batch_timeout_ms = 10000;
};

int run_erm(const GlobalOpts& g, const ErmOpts& o) {
  RunConfig cfg;
  cfg.task = build_task(o.task, o.n, g.seed, o.k, o.pattern);
  cfg.n = o.n;
  cfg.m = o.m;
  cfg.split_spec = {o.m / 2, o.m - o.m / 2};
  cfg.attempts = o.attempts;
  cfg.theta = o.theta;
  cfg.data_seed = g.seed;
  cfg.split_seed = g.seed ^ 0x51717;
  cfg.proposer.endpoint = o.endpoint;
  cfg.proposer.model_id = o.model;
  cfg.proposer.call_timeout_ms = o.call_timeout_ms;
  cfg.sandbox.batch_timeout_ms = o.batch_timeout_ms;
  if (!g.config.empty()) {
    json j = load_json_file(g.config);
    if (j.contains("proposer")) proposer_from_json(j["proposer"], cfg.proposer);
    if (j.contains("sandbox")) sandbox_from_json(j["sandbox"], cfg.sandbox);
  }

  std::unique_ptr<CandidateSource> source;
  if (!g.mock_proposer.empty()) {
    auto bodies = load_json_file(g.mock_proposer).get<std::vector<std::string>>();
    source = std::make_unique<ScriptedProposer>(std::move(bodies),
                                                cfg.proposer.candidates_per_call);
  } else {
    if (cfg.proposer.endpoint.empty())
      throw CLI::ValidationError("erm needs --endpoint (or --mock-proposer)");
    source = std::make_unique<HttpProposer>(cfg.proposer);
  }

  fs::create_directories(g.out_dir);
  std::string record_path =
      o.record.empty() ? (fs::path(g.out_dir) / "run.jsonl").string() : o.record;
  RunRecordWriter record(record_path);
  RunResult res = run_llm_erm(cfg, *source, record);

  std::cout << "stop reason: " << res.stop_reason << " after " << res.attempts_used
            << " attempts (" << res.proposer_calls << " proposer calls, " << std::fixed
            << std::setprecision(1) << res.wall_ms << " ms)\n";
  std::cout << "record: " << record_path << "\n";
  if (!res.best) {
    std::cout << "no admissible candidate\n";
    return kPartialFailure;
  }
  std::cout << "selected candidate " << res.best->dedup_key.substr(0, 12)
            << " with validation error " << std::setprecision(6) << *res.err_star << "\n";
  if (!o.test.empty()) {
    LabeledDataset test = load_dataset(o.test);
    double acc = evaluate_on_test(guest_hypothesis(*res.best, cfg.sandbox), test);
    std::cout << "test accuracy " << acc << "\n";
  }
  return kOk;
}

struct SgdOpts {
  std::string train;
  std::string test;
  int width = 256;
  double lr = 0.1;
  int epochs = 400;
  int batch = 20;
  double clip = 5.0;
  std::string mode = "minibatch";
  int steps = 0;
};

int run_sgd(const GlobalOpts& g, const SgdOpts& o) {
  LabeledDataset data = load_dataset(o.train);
  TrainConfig cfg;
  cfg.width = o.width;
  cfg.lr = o.lr;
  cfg.epochs = o.epochs;
  cfg.batch = o.batch;
  cfg.clip = o.clip;
  cfg.seed = g.seed;
  cfg.mode = o.mode == "coordinate" ? TrainConfig::Mode::coordinate
                                    : TrainConfig::Mode::minibatch;
  cfg.coordinate_steps = o.steps;
  MlpModel model(data.n, cfg.width, cfg.seed);
  TrainReport rep = train(model, data, cfg);
  std::cout << "updates " << rep.updates << ", train accuracy " << std::fixed
            << std::setprecision(6) << rep.final_train_accuracy << "\n";
  if (!o.test.empty()) {
    LabeledDataset test = load_dataset(o.test);
    std::cout << "test accuracy " << mlp_accuracy(model, test) << "\n";
  }
  return kOk;
}

struct TheoryOpts {
  int length = 100;
  int alphabet = 12;
  double delta = 1e-10;
  long m = 100000;
  bool base2 = false;
  double class_size = 1.0;
  int index = 1;
  double dim = 0.0;
  int log2_dim = 0;
  double epsilon = 0.25;
  double batch = 20.0;
  int witness_n = 10;
  int n_max = 12;
  bool perturbed = false;
};

int run_theory_pac(const TheoryOpts& o) {
  BoundInputs in{o.length, o.alphabet, o.delta, o.m};
  LogBase base = o.base2 ? LogBase::base2 : LogBase::natural;
  std::cout << std::setprecision(17) << "generalization gap bound " << pac_bound(in, base)
            << "\naccuracy floor " << erm_accuracy_floor(in, base) << "\n";
  return kOk;
}

int run_theory_cor(const TheoryOpts& o) {
  LogBase base = o.base2 ? LogBase::base2 : LogBase::natural;
  std::cout << std::setprecision(17) << "finite-class bound "
            << cor_bound(o.class_size, o.index, o.delta, o.m, base) << "\n";
  return kOk;
}

int run_theory_sq(const TheoryOpts& o) {
  double d = o.log2_dim > 0 ? std::pow(2.0, o.log2_dim) : o.dim;
  if (d < 1.0) throw CLI::ValidationError("sq needs --dim or --log2-dim");
  std::cout << std::setprecision(17) << "iteration lower bound "
            << sgd_iteration_lower_bound(d, o.epsilon, o.batch) << "\n";
  return kOk;
}

int run_theory_sq_witness(const TheoryOpts& o) {
  int n = o.witness_n;
  if (n < 1 || n > 12) throw CLI::ValidationError("--n must be in [1, 12]");
  std::vector<std::vector<int>> sets;
  sets.reserve(1u << n);
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < n; ++i)
      if (mask >> i & 1) s.push_back(i);
    sets.push_back(std::move(s));
  }
  SqReport rep = sq_dim_witness_check(sets, n, 1ull << n);
  std::cout << "claimed dimension " << rep.d_claim << ", pairs checked " << rep.pairs_checked
            << "\nlargest off-diagonal |correlation| " << rep.max_offdiag.num << "/2^"
            << rep.max_offdiag.log2_den << "\nverdict "
            << (rep.verdict ? "witnessed" : "refuted") << "\n";
  return rep.verdict ? kOk : kPartialFailure;
}

int run_theory_ca(const TheoryOpts& o) {
  std::vector<CaVerdict> verdicts;
  if (o.perturbed) {
    verdicts = ca_identity_check(o.n_max, [](std::string_view x) {
      int ascents = 0;
      for (std::size_t i = 0; i + 1 < x.size(); ++i)
        if (x[i] == '0' && x[i + 1] == '1') ++ascents;
      return ((x.front() == '1') ^ (ascents & 1)) ? 1 : 0;
    });
  } else {
    verdicts = ca_identity_check(o.n_max);
  }
  bool all_hold = true;
  for (const auto& v : verdicts) {
    std::cout << "n=" << v.n << " evaluations=" << v.evaluations
              << (v.holds ? " identity holds" : " counterexample " + v.counterexample)
              << "\n";
    all_hold = all_hold && v.holds;
  }
  std::cout << (all_hold ? "identity holds at every checked length\n"
                         : "identity refuted\n");
  return all_hold ? kOk : kPartialFailure;
}

struct EvalOpts {
  std::string program;
  std::string guest;
  std::string test;
  bool invariance = false;
  std::string task;
  int n = 20;
  int task_k = 0;
  std::string task_pattern;
  std::vector<int> probes;
  int probe_m = 1000;
};

int run_eval(const GlobalOpts& g, const EvalOpts& o) {
  if (o.program.empty() == o.guest.empty())
    throw CLI::ValidationError("eval needs exactly one of --program / --guest");
  Hypothesis h = o.program.empty()
                     ? guest_hypothesis(make_candidate(read_text_file(o.guest)))
                     : dsl_hypothesis(o.program);

  if (!o.test.empty()) {
    LabeledDataset test = load_dataset(o.test);
    try {
      std::cout << "test accuracy " << std::setprecision(6)
                << evaluate_on_test(h, test) << "\n";
    } catch (const std::exception& e) {
      std::cout << "hypothesis not total on test set: " << e.what() << "\n";
      return kPartialFailure;
    }
  }

  if (o.invariance) {
    if (o.task.empty())
      throw CLI::ValidationError("--invariance needs --task (and --n) to draw probe sets");
    TaskSpec task = build_task(o.task, o.n, g.seed, o.task_k, o.task_pattern);
    InvarianceProfile profile =
        dimension_invariance_eval(h, task, o.n, o.probes, o.probe_m, g.seed);
    std::ostringstream grid;
    for (std::size_t i = 0; i < profile.points.size(); ++i)
      grid << (i ? "," : "") << profile.points[i].n;
    for (const auto& p : profile.points) {
      std::cout << "n=" << p.n << " m=" << p.m;
      if (p.total)
        std::cout << " accuracy " << std::setprecision(6) << p.accuracy << "\n";
      else
        std::cout << " not total\n";
    }
    if (profile.verdict == InvarianceProfile::Verdict::invariant_exact)
      std::cout << "verdict inv {" << grid.str() << "}\n";
    else
      std::cout << "verdict " << invariance_verdict_name(profile.verdict) << " {"
                << grid.str() << "}\n";
  }

  if (o.test.empty() && !o.invariance)
    throw CLI::ValidationError("eval needs --test and/or --invariance");
  return kOk;
}

int run_sweep(const GlobalOpts& g) {
  ExperimentPlan plan;
  if (!g.config.empty()) plan = plan_from_json(load_json_file(g.config));
  if (!g.mock_proposer.empty()) plan.mock_script = g.mock_proposer;

  ProposerFactory factory;
  bool wants_llm = false;
  for (const auto& m : plan.methods) wants_llm = wants_llm || m == "llm-erm";
  if (!plan.mock_script.empty()) {
    factory = scripted_proposer_factory(plan.mock_script, plan.proposer.candidates_per_call);
  } else if (wants_llm) {
    if (plan.proposer.endpoint.empty())
      throw CLI::ValidationError(
          "plan includes llm-erm but no proposer endpoint or mock script is configured");
    factory = http_proposer_factory(plan.proposer);
  } else {
    factory = [] { return std::unique_ptr<CandidateSource>(new ScriptedProposer({}, 1)); };
  }

  PlanOutcome outcome = run_plan(plan, g.out_dir, factory);
  std::cout << render_table_text(outcome.table);
  std::cout << outcome.table.cells.size() << " cells (" << outcome.skipped_cells
            << " reused, " << outcome.failed_cells << " failed)\n";
  return outcome.failed_cells == 0 ? kOk : kPartialFailure;
}

int run_report(const GlobalOpts& g) {
  ResultTable table = load_cells(g.out_dir);
  emit_report(table, g.out_dir);
  if (table.cells.empty()) {
    std::cout << "no cell records under " << g.out_dir << "; wrote no-data notice\n";
    return kOk;
  }
  std::cout << render_table_text(table);
  std::cout << "artifacts in " << g.out_dir << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"program-learning workbench"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--seed", g.seed, "base seed")->capture_default_str();
  app.add_option("--mock-proposer", g.mock_proposer,
                 "JSON array file of scripted proposer responses");
  app.add_option("--out", g.out_dir, "output directory")->capture_default_str();

  GenOpts gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a balanced labeled dataset");
  gen_cmd->add_option("--task", gen.task, "task name")->required();
  gen_cmd->add_option("--n", gen.n, "input length")->capture_default_str();
  gen_cmd->add_option("--m", gen.m, "sample count")->capture_default_str();
  gen_cmd->add_option("--role", gen.role, "dataset role tag")->capture_default_str();
  gen_cmd->add_option("--k", gen.k, "parity index count (k_parity)");
  gen_cmd->add_option("--pattern", gen.pattern, "target pattern (pattern_match)");
  gen_cmd->add_option("--file", gen.file, "output path (default under --out)");

  SplitOpts sp;
  auto* split_cmd = app.add_subcommand("split", "split a dataset into train/validation");
  split_cmd->add_option("--in", sp.in_path, "dataset file")->required();
  split_cmd->add_option("--m-train", sp.m_train, "train size (default half)");
  split_cmd->add_option("--m-val", sp.m_val, "validation size (default the rest)");
  split_cmd->add_option("--train-out", sp.train_out, "train output path");
  split_cmd->add_option("--val-out", sp.val_out, "validation output path");

  LfpsOpts lf;
  auto* lfps_cmd = app.add_subcommand("lfps", "length-first program search");
  lfps_cmd->add_option("--train", lf.train, "training dataset file")->required();
  lfps_cmd->add_option("--test", lf.test, "optional test dataset file");
  lfps_cmd->add_option("--l-max", lf.l_max, "maximum program length")->capture_default_str();
  lfps_cmd->add_option("--step-budget", lf.step_budget, "interpreter steps per example")
      ->capture_default_str();

  ErmOpts erm;
  auto* erm_cmd = app.add_subcommand("erm", "propose-and-verify loop");
  erm_cmd->add_option("--task", erm.task, "task name")->required();
  erm_cmd->add_option("--n", erm.n, "input length")->capture_default_str();
  erm_cmd->add_option("--m", erm.m, "pool size before the even split")->capture_default_str();
  erm_cmd->add_option("--k", erm.k, "parity index count (k_parity)");
  erm_cmd->add_option("--pattern", erm.pattern, "target pattern (pattern_match)");
  erm_cmd->add_option("--attempts", erm.attempts, "proposer attempts")->capture_default_str();
  erm_cmd->add_option("--theta", erm.theta, "early-stop validation error threshold")
      ->capture_default_str();
  erm_cmd->add_option("--record", erm.record, "run record path (default under --out)");
  erm_cmd->add_option("--test", erm.test, "optional test dataset file");
  erm_cmd->add_option("--endpoint", erm.endpoint, "proposer endpoint URL");
  erm_cmd->add_option("--model", erm.model, "proposer model id");
  erm_cmd->add_option("--call-timeout-ms", erm.call_timeout_ms, "per-call budget")
      ->capture_default_str();
  erm_cmd->add_option("--batch-timeout-ms", erm.batch_timeout_ms, "sandbox batch deadline")
      ->capture_default_str();

  SgdOpts sg;
  auto* sgd_cmd = app.add_subcommand("sgd", "MLP baseline");
  sgd_cmd->add_option("--train", sg.train, "training dataset file")->required();
  sgd_cmd->add_option("--test", sg.test, "optional test dataset file");
  sgd_cmd->add_option("--width", sg.width, "hidden width")->capture_default_str();
  sgd_cmd->add_option("--lr", sg.lr, "learning rate")->capture_default_str();
  sgd_cmd->add_option("--epochs", sg.epochs, "epochs (minibatch mode)")->capture_default_str();
  sgd_cmd->add_option("--batch", sg.batch, "batch size")->capture_default_str();
  sgd_cmd->add_option("--clip", sg.clip, "per-coordinate gradient clip")->capture_default_str();
  sgd_cmd->add_option("--mode", sg.mode, "minibatch | coordinate")
      ->check(CLI::IsMember({"minibatch", "coordinate"}))
      ->capture_default_str();
  sgd_cmd->add_option("--steps", sg.steps, "coordinate updates (coordinate mode)");

  TheoryOpts th;
  auto* theory_cmd = app.add_subcommand("theory", "bound calculators and exact audits");
  theory_cmd->require_subcommand(1);
  auto* pac_cmd = theory_cmd->add_subcommand("pac", "enumeration generalization bound");
  pac_cmd->add_option("--length", th.length, "program length")->capture_default_str();
  pac_cmd->add_option("--alphabet", th.alphabet, "alphabet size")->capture_default_str();
  pac_cmd->add_option("--delta", th.delta, "confidence parameter")->capture_default_str();
  pac_cmd->add_option("--m", th.m, "sample count")->capture_default_str();
  pac_cmd->add_flag("--base2", th.base2, "use base-2 logarithms");
  auto* cor_cmd = theory_cmd->add_subcommand("cor", "finite-class generalization bound");
  cor_cmd->add_option("--class-size", th.class_size, "hypothesis class size")
      ->capture_default_str();
  cor_cmd->add_option("--index", th.index, "class index in the union bound series")
      ->capture_default_str();
  cor_cmd->add_option("--delta", th.delta, "confidence parameter")->capture_default_str();
  cor_cmd->add_option("--m", th.m, "sample count")->capture_default_str();
  cor_cmd->add_flag("--base2", th.base2, "use base-2 logarithms");
  auto* sq_cmd = theory_cmd->add_subcommand("sq", "iteration lower bound");
  sq_cmd->add_option("--dim", th.dim, "statistical dimension");
  sq_cmd->add_option("--log2-dim", th.log2_dim, "statistical dimension as a power of two");
  sq_cmd->add_option("--epsilon", th.epsilon, "advantage")->capture_default_str();
  sq_cmd->add_option("--batch", th.batch, "batch size")->capture_default_str();
  auto* sqw_cmd = theory_cmd->add_subcommand("sq-witness", "pairwise parity orthogonality");
  sqw_cmd->add_option("--n", th.witness_n, "input length (checks all 2^n parities)")
      ->capture_default_str();
  auto* ca_cmd = theory_cmd->add_subcommand("ca", "automaton closed-form identity audit");
  ca_cmd->add_option("--n-max", th.n_max, "exhaustive check up to this length")
      ->capture_default_str();
  ca_cmd->add_flag("--perturbed", th.perturbed, "audit the deliberately wrong rule instead");

  EvalOpts ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a hypothesis");
  eval_cmd->add_option("--program", ev.program, "stack-machine program text");
  eval_cmd->add_option("--guest", ev.guest, "guest source file");
  eval_cmd->add_option("--test", ev.test, "test dataset file");
  eval_cmd->add_flag("--invariance", ev.invariance, "probe accuracy across input lengths");
  eval_cmd->add_option("--task", ev.task, "task name for probe set generation");
  eval_cmd->add_option("--n", ev.n, "training input length")->capture_default_str();
  eval_cmd->add_option("--k", ev.task_k, "parity index count (k_parity)");
  eval_cmd->add_option("--pattern", ev.task_pattern, "target pattern (pattern_match)");
  eval_cmd->add_option("--probes", ev.probes, "probe lengths (default n,2n,5n,200)");
  eval_cmd->add_option("--probe-m", ev.probe_m, "samples per probe length")
      ->capture_default_str();

  auto* sweep_cmd = app.add_subcommand("sweep", "run an experiment plan grid");
  auto* report_cmd = app.add_subcommand("report", "render persisted records into artifacts");

  for (auto* sub : app.get_subcommands({})) {
    sub->fallthrough();
    for (auto* nested : sub->get_subcommands({})) nested->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen_cmd) return run_gen(g, gen);
    if (*split_cmd) return run_split(g, sp);
    if (*lfps_cmd) return run_lfps(g, lf);
    if (*erm_cmd) return run_erm(g, erm);
    if (*sgd_cmd) return run_sgd(g, sg);
    if (*theory_cmd) {
      if (*pac_cmd) return run_theory_pac(th);
      if (*cor_cmd) return run_theory_cor(th);
      if (*sq_cmd) return run_theory_sq(th);
      if (*sqw_cmd) return run_theory_sq_witness(th);
      if (*ca_cmd) return run_theory_ca(th);
    }
    if (*eval_cmd) return run_eval(g, ev);
    if (*sweep_cmd) return run_sweep(g);
    if (*report_cmd) return run_report(g);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
