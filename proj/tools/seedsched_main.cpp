// seedsched: generate synthetic fuzzing targets, run scheduling campaigns,
// and drive the experiment matrices.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "seedsched/experiment.hpp"
#include "seedsched/model_bundle.hpp"
#include "seedsched/presets.hpp"
#include "seedsched/simulate.hpp"

namespace fs = std::filesystem;
using namespace seedsched;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct GenOptions {
  std::string preset;
  std::string params;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool list = false;
};

struct RunOptions {
  std::string program;
  std::string policy = "random";
  std::string config_file;
  std::string init_model;
  std::string out = "out";
  CampaignConfig cfg;  // knob fields only; program/policy filled later
};

struct ExperimentOptions {
  std::string kind = "effectiveness";
  std::vector<std::string> programs;
  std::vector<std::string> policies = {"meuzz-ol", "meuzz-en", "random", "afl"};
  std::string baseline = "random";
  std::string models_dir;
  ExperimentSpec spec;
};

void print_program_summary(const ProgramModel& m) {
  std::uint32_t hard = 0, labels = 0, loops = 0;
  for (const auto& b : m.branches) {
    hard += b.is_hard() ? 1 : 0;
    labels += b.local_labels;
    loops += b.loop_max > 0 ? 1 : 0;
  }
  std::cout << "program: " << m.name << "\n"
            << "  gen_seed: " << m.gen_seed << "\n"
            << "  branches: " << m.branch_count() << "\n"
            << "  groups: " << m.groups.size() << "\n"
            << "  hard branches: " << hard << "\n"
            << "  loop heads: " << loops << "\n"
            << "  max depth: " << m.max_depth() << "\n"
            << "  labels: " << labels << "\n"
            << "  guarded labels: " << guarded_label_count(m) << "\n";
}

// Mirrors the CampaignConfig fields; command-line flags override file values.
void apply_config_file(const fs::path& path, RunOptions& opt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  nlohmann::json j;
  in >> j;
  if (j.contains("program")) opt.program = j.at("program").get<std::string>();
  if (j.contains("policy")) opt.policy = j.at("policy").get<std::string>();
  if (j.contains("init_model")) opt.init_model = j.at("init_model").get<std::string>();
  auto& c = opt.cfg;
  if (j.contains("ticks")) c.ticks = j.at("ticks");
  if (j.contains("fuzzer_epoch")) c.fuzzer_epoch = j.at("fuzzer_epoch");
  if (j.contains("concolic_budget")) c.concolic_budget = j.at("concolic_budget");
  if (j.contains("label_window")) c.label_window = j.at("label_window");
  if (j.contains("dispatch_k")) c.dispatch_k = j.at("dispatch_k");
  if (j.contains("rng_seed")) c.rng_seed = j.at("rng_seed");
  if (j.contains("repetition")) c.repetition = j.at("repetition");
  if (j.contains("initial_seeds"))
    c.initial_seeds = j.at("initial_seeds").get<std::vector<std::string>>();
  if (j.contains("p_easy")) c.cost.p_easy = j.at("p_easy");
  if (j.contains("p_ext")) c.cost.p_ext = j.at("p_ext");
  if (j.contains("lambda")) c.lambda = j.at("lambda");
  if (j.contains("refit_batch")) c.refit_batch = j.at("refit_batch");
}

int cmd_gen(const GenOptions& opt) {
  if (opt.list) {
    for (const auto& p : benchmark_presets())
      std::cout << p.name << ": " << p.description << " (" << p.params.branch_count
                << " branches, default seed " << p.default_seed << ")\n";
    return kExitOk;
  }
  ProgramModel model;
  if (!opt.preset.empty()) {
    const Preset& p = find_preset(opt.preset);
    model = generate_program(p.params, opt.seed.value_or(p.default_seed), p.name);
  } else if (!opt.params.empty()) {
    std::string ref = "params:" + opt.params;
    if (opt.seed) ref += ",seed=" + std::to_string(*opt.seed);
    model = resolve_program(ref);
  } else {
    throw CLI::ValidationError("gen", "one of --preset or --params is required");
  }
  if (!opt.out.empty()) {
    save_program(model, opt.out);
    std::cout << "wrote " << opt.out << "\n";
  }
  print_program_summary(model);
  return kExitOk;
}

int cmd_run(RunOptions& opt) {
  CampaignConfig cfg = opt.cfg;
  cfg.policy = policy_from_string(opt.policy);
  cfg.program = std::make_shared<const ProgramModel>(resolve_program(opt.program));
  if (!opt.init_model.empty()) {
    cfg.initial_model = load_model(opt.init_model);
    std::cout << "loaded initial model from " << opt.init_model << " (kind "
              << to_string(cfg.initial_model->kind) << ")\n";
  }
  auto stats = run_campaign(cfg);

  const fs::path out_dir(opt.out);
  write_stats_csv(stats, out_dir / "stats.csv");
  write_dispatch_csv(stats, out_dir / "dispatch.csv");
  write_training_csv(stats, out_dir / "training.csv");
  write_summary(stats, out_dir / "summary.txt");
  if (stats.final_model) {
    auto b = *stats.final_model;
    b.training_log_ref = "training.csv";
    save_model(b, out_dir / "model.json");
  }
  std::cout << "program: " << stats.program << "\npolicy: " << to_string(stats.policy)
            << "\nfinal coverage: " << stats.final_coverage()
            << "\nqueue size: " << stats.final_queue_size
            << "\ndispatches: " << stats.dispatch_count << "\nresults in: " << out_dir.string()
            << "\n";
  return kExitOk;
}

int cmd_experiment(ExperimentOptions& opt) {
  ExperimentSpec spec = opt.spec;
  spec.kind = experiment_kind_from_string(opt.kind);
  spec.programs = opt.programs;
  spec.baseline = policy_from_string(opt.baseline);
  spec.model_dir = opt.models_dir;
  spec.policies.clear();
  for (const auto& p : opt.policies) spec.policies.push_back(policy_from_string(p));
  spec.validate();

  switch (spec.kind) {
    case ExperimentKind::kEffectiveness: {
      auto res = run_effectiveness(spec);
      for (const auto& row : res.rows)
        std::cout << row.program << " " << to_string(row.policy) << ": mean final "
                  << row.mean_final << " (p vs " << to_string(spec.baseline) << " = "
                  << row.p_vs_baseline << ")\n";
      break;
    }
    case ExperimentKind::kReusability: {
      auto res = run_reusability(spec);
      for (const auto& row : res.rows)
        std::cout << row.program << ": fresh " << row.mean_fresh << " -> initialized "
                  << row.mean_init << " (" << row.improvement_pct << "%)\n";
      break;
    }
    case ExperimentKind::kTransferability: {
      auto res = run_transferability(spec);
      std::cout << "transfer matrix (rows: target, cols: model source, %):\n";
      for (std::size_t i = 0; i < res.programs.size(); ++i) {
        std::cout << "  " << res.programs[i] << ":";
        for (double v : res.matrix[i]) std::cout << " " << v;
        std::cout << "\n";
      }
      break;
    }
    case ExperimentKind::kFeatureImportance: {
      auto res = run_feature_importance(spec);
      for (std::size_t i = 0; i < res.programs.size(); ++i) {
        std::cout << res.programs[i] << ":";
        for (int f = 0; f < FeatureVector::kDim; ++f) std::cout << " " << res.importances[i][f];
        std::cout << "\n";
      }
      break;
    }
  }
  if (!spec.output_dir.empty()) std::cout << "results in: " << spec.output_dir.string() << "\n";
  return kExitOk;
}

int cmd_model(const std::string& action, const std::string& path) {
  auto b = load_model(path);  // throws on version/corruption problems
  if (action == "inspect") {
    std::cout << "kind: " << to_string(b.kind) << "\n";
    if (b.ol)
      std::cout << "linear: d=" << b.ol->dim() << " lambda=" << b.ol->lambda
                << " updates=" << b.ol->t << "\n";
    if (b.rf)
      std::cout << "forest: " << b.rf->trees.size() << " trees, d=" << b.rf->d << "\n";
    if (!b.training_log_ref.empty()) std::cout << "training log: " << b.training_log_ref << "\n";
    return kExitOk;
  }
  b.validate();
  std::cout << path << ": valid " << to_string(b.kind) << " model\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"machine-learned seed scheduling for hybrid fuzzing, simulated"};
  app.require_subcommand(1);

  std::uint64_t global_seed = 1;
  std::string global_out;
  unsigned jobs = 1;
  app.add_option("--seed", global_seed, "base rng seed")->capture_default_str();
  app.add_option("--out", global_out, "output directory or file");
  app.add_option("--jobs", jobs, "worker threads for experiments")->capture_default_str();

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a program model file");
  gen_cmd->add_option("--preset", gen.preset, "preset name (see --list)");
  gen_cmd->add_option("--params", gen.params, "key=value list, e.g. branches=200,hard=0.3");
  gen_cmd->add_flag("--list", gen.list, "list available presets");

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "run one campaign");
  run_cmd->add_option("--program", run.program, "program file or preset:/params: reference");
  run_cmd->add_option("--policy", run.policy, "random|afl|meuzz-ol|meuzz-rf|meuzz-en")
      ->check(CLI::IsMember({"random", "afl", "meuzz-ol", "meuzz-rf", "meuzz-en"}));
  run_cmd->add_option("--config", run.config_file, "campaign config JSON (flags override)");
  run_cmd->add_option("--init-model", run.init_model, "model file loaded before tick 0");
  run_cmd->add_option("--ticks", run.cfg.ticks, "fuzzing epochs to simulate")
      ->capture_default_str();
  run_cmd->add_option("--fuzzer-epoch", run.cfg.fuzzer_epoch, "mutations per tick")
      ->capture_default_str();
  run_cmd->add_option("--concolic-budget", run.cfg.concolic_budget, "solve units per dispatch")
      ->capture_default_str();
  run_cmd->add_option("--label-window", run.cfg.label_window, "label maturity window")
      ->capture_default_str();
  run_cmd->add_option("--dispatch-k", run.cfg.dispatch_k, "seeds per concolic round")
      ->capture_default_str();
  run_cmd->add_option("--repetition", run.cfg.repetition, "repetition tag in the stats CSV")
      ->capture_default_str();
  run_cmd->add_option("--init-seeds", run.cfg.initial_seeds, "initial seed tokens (naive|random)");

  ExperimentOptions exp;
  auto* exp_cmd = app.add_subcommand("experiment", "run an experiment matrix");
  exp_cmd->add_option("--kind", exp.kind, "effectiveness|reuse|transfer|feature-importance")
      ->capture_default_str()
      ->check(CLI::IsMember({"effectiveness", "reuse", "reusability", "transfer",
                             "transferability", "feature-importance"}));
  exp_cmd->add_option("--programs", exp.programs, "program references")->required();
  exp_cmd->add_option("--policies", exp.policies, "policies (effectiveness only)")
      ->check(CLI::IsMember({"random", "afl", "meuzz-ol", "meuzz-rf", "meuzz-en"}));
  exp_cmd->add_option("--baseline", exp.baseline, "baseline policy for p-values")
      ->capture_default_str()
      ->check(CLI::IsMember({"random", "afl", "meuzz-ol", "meuzz-rf", "meuzz-en"}));
  exp_cmd->add_option("--reps", exp.spec.repetitions, "repetitions per configuration")
      ->capture_default_str();
  exp_cmd->add_option("--ticks", exp.spec.proto.ticks, "ticks per campaign")
      ->capture_default_str();
  exp_cmd->add_option("--models", exp.models_dir,
                      "directory of pre-trained models (transfer mode)");

  std::string model_action, model_path;
  auto* model_cmd = app.add_subcommand("model", "inspect or validate a model file");
  model_cmd->add_option("action", model_action, "inspect|validate")
      ->required()
      ->check(CLI::IsMember({"inspect", "validate"}));
  model_cmd->add_option("path", model_path, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints help/error text
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) {
      if (app.count("--seed")) gen.seed = global_seed;
      gen.out = global_out;
      return cmd_gen(gen);
    }
    if (run_cmd->parsed()) {
      if (!run.config_file.empty()) {
        RunOptions from_file;
        apply_config_file(run.config_file, from_file);
        if (run_cmd->count("--program") == 0 && !from_file.program.empty())
          run.program = from_file.program;
        if (run_cmd->count("--policy") == 0 && !from_file.policy.empty())
          run.policy = from_file.policy;
        if (run_cmd->count("--init-model") == 0) run.init_model = from_file.init_model;
        auto flags = run.cfg;
        run.cfg = from_file.cfg;
        if (run_cmd->count("--ticks")) run.cfg.ticks = flags.ticks;
        if (run_cmd->count("--fuzzer-epoch")) run.cfg.fuzzer_epoch = flags.fuzzer_epoch;
        if (run_cmd->count("--concolic-budget")) run.cfg.concolic_budget = flags.concolic_budget;
        if (run_cmd->count("--label-window")) run.cfg.label_window = flags.label_window;
        if (run_cmd->count("--dispatch-k")) run.cfg.dispatch_k = flags.dispatch_k;
        if (run_cmd->count("--repetition")) run.cfg.repetition = flags.repetition;
        if (run_cmd->count("--init-seeds")) run.cfg.initial_seeds = flags.initial_seeds;
      }
      if (run.program.empty())
        throw CLI::ValidationError("run", "--program is required (flag or config file)");
      if (app.count("--seed") || run.config_file.empty()) run.cfg.rng_seed = global_seed;
      if (!global_out.empty()) run.out = global_out;
      return cmd_run(run);
    }
    if (exp_cmd->parsed()) {
      exp.spec.base_seed = global_seed;
      exp.spec.jobs = jobs;
      exp.spec.output_dir = global_out.empty() ? fs::path("experiment-out") : fs::path(global_out);
      return cmd_experiment(exp);
    }
    if (model_cmd->parsed()) return cmd_model(model_action, model_path);
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
