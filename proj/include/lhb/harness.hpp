#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lhb/agents.hpp"
#include "lhb/env.hpp"
#include "lhb/riplab.hpp"

namespace lhb {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { bandit, phase_transition, rip_constant, lemma1 };

const char* to_string(ExperimentKind kind);

struct AgentSpec {
  std::string name;
  AgentKind kind = AgentKind::ad_lasso;
  AgentParams params;
  // Replaces env.w_pattern for this agent's environments.
  std::optional<WeightPattern> w_pattern;
};

struct PhaseTransitionSpec {
  std::vector<EnsembleKind> ensembles{EnsembleKind::iid, EnsembleKind::circulant_scalar};
  GeneratorDist dist = GeneratorDist::gaussian;
  long d = 10;
  long h = 100;
  std::vector<long> s_list{1, 50, 100};
  std::vector<long> m_grid;
  long max_iter = 500;
};

struct Lemma1Spec {
  std::vector<long> p_list{4, 256};
};

struct ExperimentSpec {
  ExperimentKind experiment = ExperimentKind::bandit;
  EnvConfig env;
  std::vector<AgentSpec> agents;
  PhaseTransitionSpec phase_transition;
  RipConstantConfig rip_constant;
  Lemma1Spec lemma1;
  long trials = 10;
  std::uint64_t base_seed = 0;
  std::string output_dir = "out";
  // Knobs a preset filled in without a documented value.
  std::vector<std::string> defaulted;

  // Throws ConfigError naming the first offending field.
  void validate() const;
};

// JSON round trip. Unknown fields are rejected.
nlohmann::json to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);
ExperimentSpec load_spec(const std::filesystem::path& path);

// Names accepted by preset().
const std::vector<std::string>& preset_names();

// Figure parameterizations. `s` overrides the sparsity of presets that sweep it.
ExperimentSpec preset(const std::string& name, std::optional<long> s = std::nullopt);

// Sparsity values swept by presets that take one.
const std::vector<long>& preset_s_sweep();
bool preset_takes_s(const std::string& name);

// ---------------------------------------------------------------------------
// Running

// Seeds. Environments are shared across agents within a trial; tie-breaking
// streams depend on the agent name only, so adding an agent changes nothing else.
std::uint64_t env_seed(std::uint64_t base_seed, long trial);
std::uint64_t agent_seed(std::uint64_t base_seed, const std::string& agent, long trial);

struct TrialResult {
  std::string agent;
  long trial = 0;
  std::vector<double> cum_regret;
  std::vector<EpochRecord> epochs;
  std::vector<double> epoch_sin_angle;
  std::optional<std::string> error;
};

// One (agent, trial) bandit run. Does not throw for agent failures; they are
// reported in `error`.
TrialResult run_trial(const ExperimentSpec& spec, const AgentSpec& agent, long trial);

// Harness-only run with the greedy true-theta agent.
TrialResult run_oracle_trial(const ExperimentSpec& spec, long trial);

struct Aggregate {
  std::vector<double> mean;
  std::vector<double> stderr_;
  long count = 0;
};

// Pointwise mean and sample standard deviation / sqrt(n) (0 when n = 1).
Aggregate aggregate_traces(const std::vector<const std::vector<double>*>& traces);

struct RunSummary {
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> failures;
  double wall_seconds = 0;
};

// Worker count from LHB_WORKERS, else hardware concurrency.
unsigned default_workers();

// Runs and writes every output of `spec` under spec.output_dir.
RunSummary run_experiment(const ExperimentSpec& spec, unsigned workers = 0);

// FNV-1a of the canonical JSON of the spec, hex.
std::string config_hash(const ExperimentSpec& spec);

// CSV helpers
void write_regret_csv(std::ostream& out, const std::vector<double>& cum_regret);
void write_aggregate_csv(std::ostream& out, const Aggregate& agg);
void write_epochs_csv(std::ostream& out, const TrialResult& result);

// ---------------------------------------------------------------------------
// Prefix-mass diagnostic

struct QDiagnostic {
  long q = 0;
  double alpha = 0;  // log_h q
};

// Smallest q whose prefix w[0..q) has l2 norm >= mu, with alpha = log_h(q).
QDiagnostic diagnostic_q(const VectorXd& w, double mu);

}  // namespace lhb
