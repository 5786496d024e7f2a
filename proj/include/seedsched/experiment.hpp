#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "seedsched/model_bundle.hpp"
#include "seedsched/presets.hpp"
#include "seedsched/simulate.hpp"
#include "seedsched/stats.hpp"

// Experiment matrices over programs x policies x repetitions. Every campaign
// seed is derived from (base seed, program, policy, repetition, phase), so
// any table regenerates bit-exactly and the transfer matrix diagonal runs the
// exact same campaigns as the reuse experiment.

namespace seedsched {

enum class ExperimentKind : std::uint8_t {
  kEffectiveness,
  kReusability,
  kTransferability,
  kFeatureImportance
};

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "effectiveness") return ExperimentKind::kEffectiveness;
  if (s == "reuse" || s == "reusability") return ExperimentKind::kReusability;
  if (s == "transfer" || s == "transferability") return ExperimentKind::kTransferability;
  if (s == "feature-importance") return ExperimentKind::kFeatureImportance;
  throw std::invalid_argument(
      "unknown experiment kind: " + s +
      " (expected effectiveness|reuse|transfer|feature-importance)");
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kEffectiveness;
  std::vector<std::string> programs;           // preset:/params:/path references
  std::vector<PolicyKind> policies = {PolicyKind::kMeuzzOl, PolicyKind::kRandom};
  std::uint32_t repetitions = 5;
  std::filesystem::path output_dir;            // empty: keep results in memory only
  PolicyKind baseline = PolicyKind::kRandom;   // effectiveness comparison target
  std::uint64_t base_seed = 1;
  unsigned jobs = 1;
  std::filesystem::path model_dir;             // transfer: load instead of train when set
  CampaignConfig proto;                        // ticks, budgets, cost model, ...

  void validate() const {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (programs.empty()) throw std::invalid_argument("experiment needs programs");
    if (kind == ExperimentKind::kTransferability && programs.size() < 2)
      throw std::invalid_argument("transferability needs at least 2 programs");
  }
};

inline std::uint64_t campaign_seed(std::uint64_t base, const std::string& program,
                                   PolicyKind policy, std::uint32_t rep, const char* phase) {
  return mix_seed(mix_seed(base, hash_str(program)),
                  mix_seed(static_cast<std::uint64_t>(policy) * 1000003ull + rep,
                           hash_str(phase)));
}

namespace detail {

inline std::vector<CampaignStats> run_all(const std::vector<CampaignConfig>& cfgs,
                                          unsigned jobs) {
  std::vector<CampaignStats> out(cfgs.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < cfgs.size(); ++i) out[i] = run_campaign(cfgs[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cfgs.size();) {
      try {
        out[i] = run_campaign(cfgs[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

inline std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (auto v : seeds) {
    if (!s.empty()) s += ';';
    s += std::to_string(v);
  }
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Effectiveness: coverage curves per program x policy plus Mann-Whitney
// p-values of each policy against the baseline policy.

struct EffectivenessRow {
  std::string program;
  PolicyKind policy = PolicyKind::kRandom;
  std::vector<double> finals;
  std::vector<std::uint64_t> seeds;
  double mean_final = 0.0;
  double p_vs_baseline = 1.0;
};

struct EffectivenessResult {
  std::vector<EffectivenessRow> rows;
  std::vector<CampaignStats> runs;

  const EffectivenessRow& row(const std::string& program, PolicyKind policy) const {
    for (const auto& r : rows)
      if (r.program == program && r.policy == policy) return r;
    throw std::out_of_range("no such effectiveness row");
  }
};

inline EffectivenessResult run_effectiveness(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<std::shared_ptr<const ProgramModel>> models;
  for (const auto& ref : spec.programs)
    models.push_back(std::make_shared<const ProgramModel>(resolve_program(ref)));

  std::vector<CampaignConfig> cfgs;
  for (std::size_t pi = 0; pi < models.size(); ++pi)
    for (PolicyKind policy : spec.policies)
      for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep) {
        CampaignConfig c = spec.proto;
        c.program = models[pi];
        c.policy = policy;
        c.repetition = rep;
        c.rng_seed =
            campaign_seed(spec.base_seed, models[pi]->name, policy, rep, "effectiveness");
        cfgs.push_back(std::move(c));
      }
  auto runs = detail::run_all(cfgs, spec.jobs);

  EffectivenessResult result;
  std::size_t k = 0;
  for (std::size_t pi = 0; pi < models.size(); ++pi)
    for (PolicyKind policy : spec.policies) {
      EffectivenessRow row;
      row.program = models[pi]->name;
      row.policy = policy;
      for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep, ++k) {
        row.finals.push_back(static_cast<double>(runs[k].final_coverage()));
        row.seeds.push_back(runs[k].rng_seed);
      }
      row.mean_final = mean(row.finals);
      result.rows.push_back(std::move(row));
    }
  const bool have_baseline =
      std::find(spec.policies.begin(), spec.policies.end(), spec.baseline) !=
      spec.policies.end();
  for (auto& row : result.rows) {
    if (!have_baseline || spec.repetitions < 3) continue;  // U test needs >= 3 per side
    const auto& base = result.row(row.program, spec.baseline);
    row.p_vs_baseline = (&row == &base) ? 1.0 : mann_whitney_u(row.finals, base.finals).p;
  }
  result.runs = std::move(runs);

  if (!spec.output_dir.empty()) {
    auto curves = open_output(spec.output_dir / "coverage_curves.csv");
    curves << "tick,policy,program,repetition,covered\n";
    for (const auto& s : result.runs) write_stats_csv(s, curves, false);
    auto summary = open_output(spec.output_dir / "effectiveness.csv");
    summary << "program,policy,mean_final,p_vs_" << to_string(spec.baseline) << ",seeds\n";
    for (const auto& row : result.rows)
      summary << row.program << ',' << to_string(row.policy) << ','
              << format_double(row.mean_final) << ',' << format_double(row.p_vs_baseline) << ','
              << detail::join_seeds(row.seeds) << '\n';
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reusability: train a model on a program, then compare fresh vs initialized
// campaigns on the same program, both started from the naive input.

struct ReuseRow {
  std::string program;
  std::vector<double> fresh;
  std::vector<double> init;
  std::vector<std::uint64_t> fresh_seeds;
  std::vector<std::uint64_t> init_seeds;
  std::uint64_t train_seed = 0;
  double mean_fresh = 0.0;
  double mean_init = 0.0;
  double improvement_pct = 0.0;  // 100 * (init - fresh) / fresh at the final tick
};

struct ReuseResult {
  std::vector<ReuseRow> rows;
  std::vector<ModelBundle> trained;  // aligned with rows
};

namespace detail {

inline CampaignConfig reuse_run_config(const ExperimentSpec& spec,
                                       std::shared_ptr<const ProgramModel> model,
                                       PolicyKind policy, std::uint32_t rep, const char* phase,
                                       std::optional<ModelBundle> init) {
  CampaignConfig c = spec.proto;
  c.program = std::move(model);
  c.policy = policy;
  c.repetition = rep;
  c.initial_seeds = {"naive"};
  c.initial_model = std::move(init);
  // seed ignores the init-model source, so transfer(i, j) at j == i replays
  // the reuse campaign exactly
  c.rng_seed = campaign_seed(spec.base_seed, c.program->name, policy, rep, phase);
  return c;
}

inline ModelBundle train_model(const ExperimentSpec& spec,
                               std::shared_ptr<const ProgramModel> model, PolicyKind policy) {
  CampaignConfig c = spec.proto;
  c.program = std::move(model);
  c.policy = policy;
  c.repetition = 0;
  c.rng_seed = campaign_seed(spec.base_seed, c.program->name, policy, 0, "train");
  auto stats = run_campaign(c);
  return *stats.final_model;
}

}  // namespace detail

inline ReuseResult run_reusability(const ExperimentSpec& spec,
                                   PolicyKind policy = PolicyKind::kMeuzzOl) {
  spec.validate();
  ReuseResult result;
  for (const auto& ref : spec.programs) {
    auto model = std::make_shared<const ProgramModel>(resolve_program(ref));
    ModelBundle trained = detail::train_model(spec, model, policy);

    std::vector<CampaignConfig> cfgs;
    for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep)
      cfgs.push_back(detail::reuse_run_config(spec, model, policy, rep, "fresh", std::nullopt));
    for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep)
      cfgs.push_back(detail::reuse_run_config(spec, model, policy, rep, "init", trained));
    auto runs = detail::run_all(cfgs, spec.jobs);

    ReuseRow row;
    row.program = model->name;
    row.train_seed = campaign_seed(spec.base_seed, model->name, policy, 0, "train");
    for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep) {
      row.fresh.push_back(static_cast<double>(runs[rep].final_coverage()));
      row.fresh_seeds.push_back(runs[rep].rng_seed);
      row.init.push_back(static_cast<double>(runs[spec.repetitions + rep].final_coverage()));
      row.init_seeds.push_back(runs[spec.repetitions + rep].rng_seed);
    }
    row.mean_fresh = mean(row.fresh);
    row.mean_init = mean(row.init);
    row.improvement_pct = 100.0 * (row.mean_init - row.mean_fresh) / row.mean_fresh;
    result.rows.push_back(std::move(row));
    result.trained.push_back(std::move(trained));
  }

  if (!spec.output_dir.empty()) {
    for (std::size_t i = 0; i < result.rows.size(); ++i)
      save_model(result.trained[i],
                 spec.output_dir / "models" / (result.rows[i].program + ".json"));
    auto out = open_output(spec.output_dir / "reuse.csv");
    out << "program,mean_fresh,mean_init,improvement_pct,train_seed,fresh_seeds,init_seeds\n";
    for (const auto& r : result.rows)
      out << r.program << ',' << format_double(r.mean_fresh) << ','
          << format_double(r.mean_init) << ',' << format_double(r.improvement_pct) << ','
          << r.train_seed << ',' << detail::join_seeds(r.fresh_seeds) << ','
          << detail::join_seeds(r.init_seeds) << '\n';
  }
  return result;
}

// ---------------------------------------------------------------------------
// Transferability: N x N matrix of relative coverage improvement when program
// row i runs with the model trained on column j. The diagonal is the reuse
// experiment.

struct TransferResult {
  std::vector<std::string> programs;
  // matrix[i][j]: 100 * (mean_init(i with model j) - mean_fresh(i)) / mean_fresh(i)
  std::vector<std::vector<double>> matrix;
  std::vector<double> mean_fresh;
};

inline TransferResult run_transferability(const ExperimentSpec& spec,
                                          PolicyKind policy = PolicyKind::kMeuzzOl) {
  spec.validate();
  std::vector<std::shared_ptr<const ProgramModel>> models;
  for (const auto& ref : spec.programs)
    models.push_back(std::make_shared<const ProgramModel>(resolve_program(ref)));
  const std::size_t n = models.size();

  std::vector<ModelBundle> trained;
  for (std::size_t j = 0; j < n; ++j) {
    if (!spec.model_dir.empty()) {
      auto path = spec.model_dir / (models[j]->name + ".json");
      if (!std::filesystem::exists(path))
        throw std::runtime_error("missing model file for transfer: " + path.string());
      trained.push_back(load_model(path));
    } else {
      trained.push_back(detail::train_model(spec, models[j], policy));
    }
  }

  // fresh baselines, then the n x n initialized grid
  std::vector<CampaignConfig> cfgs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep)
      cfgs.push_back(detail::reuse_run_config(spec, models[i], policy, rep, "fresh", std::nullopt));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep)
        cfgs.push_back(detail::reuse_run_config(spec, models[i], policy, rep, "init", trained[j]));
  auto runs = detail::run_all(cfgs, spec.jobs);

  TransferResult result;
  for (const auto& m : models) result.programs.push_back(m->name);
  result.matrix.assign(n, std::vector<double>(n, 0.0));
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> finals;
    for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep, ++k)
      finals.push_back(static_cast<double>(runs[k].final_coverage()));
    result.mean_fresh.push_back(mean(finals));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> finals;
      for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep, ++k)
        finals.push_back(static_cast<double>(runs[k].final_coverage()));
      result.matrix[i][j] =
          100.0 * (mean(finals) - result.mean_fresh[i]) / result.mean_fresh[i];
    }

  if (!spec.output_dir.empty()) {
    auto out = open_output(spec.output_dir / "transfer_matrix.csv");
    out << "target\\source";
    for (const auto& p : result.programs) out << ',' << p;
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
      out << result.programs[i];
      for (std::size_t j = 0; j < n; ++j) out << ',' << format_double(result.matrix[i][j]);
      out << '\n';
    }
    auto meta = open_output(spec.output_dir / "transfer_meta.csv");
    meta << "program,mean_fresh,base_seed\n";
    for (std::size_t i = 0; i < n; ++i)
      meta << result.programs[i] << ',' << format_double(result.mean_fresh[i]) << ','
           << spec.base_seed << '\n';
  }
  return result;
}

// ---------------------------------------------------------------------------
// Feature importance: per program, the mean-decrease-impurity vector of the
// forests trained during MEUZZ-RF campaigns, averaged over repetitions.

struct ImportanceResult {
  std::vector<std::string> programs;
  std::vector<Eigen::VectorXd> importances;  // each sums to 1 (or is all-zero)
};

inline ImportanceResult run_feature_importance(const ExperimentSpec& spec) {
  spec.validate();
  ImportanceResult result;
  for (const auto& ref : spec.programs) {
    auto model = std::make_shared<const ProgramModel>(resolve_program(ref));
    std::vector<CampaignConfig> cfgs;
    for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep) {
      CampaignConfig c = spec.proto;
      c.program = model;
      c.policy = PolicyKind::kMeuzzRf;
      c.repetition = rep;
      c.rng_seed = campaign_seed(spec.base_seed, model->name, PolicyKind::kMeuzzRf, rep,
                                 "importance");
      cfgs.push_back(std::move(c));
    }
    auto runs = detail::run_all(cfgs, spec.jobs);

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(FeatureVector::kDim);
    int contributing = 0;
    for (const auto& s : runs) {
      if (!s.final_model || !s.final_model->rf || !s.final_model->rf->fitted()) continue;
      Eigen::VectorXd imp = s.final_model->rf->feature_importance();
      if (imp.sum() <= 0.0) continue;
      sum += imp;
      ++contributing;
    }
    result.programs.push_back(model->name);
    result.importances.push_back(contributing ? Eigen::VectorXd(sum / contributing)
                                              : Eigen::VectorXd::Zero(FeatureVector::kDim));
  }

  if (!spec.output_dir.empty()) {
    auto out = open_output(spec.output_dir / "feature_importance.csv");
    out << "program," << kFeatureCsvHeader << '\n';
    for (std::size_t i = 0; i < result.programs.size(); ++i) {
      out << result.programs[i];
      for (int f = 0; f < FeatureVector::kDim; ++f)
        out << ',' << format_double(result.importances[i][f]);
      out << '\n';
    }
  }
  return result;
}

}  // namespace seedsched
