#include "lhb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace lhb {

using nlohmann::json;

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::bandit: return "bandit";
    case ExperimentKind::phase_transition: return "phase_transition";
    case ExperimentKind::rip_constant: return "rip_constant";
    case ExperimentKind::lemma1: return "lemma1";
  }
  return "?";
}

namespace {

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto k : {ExperimentKind::bandit, ExperimentKind::phase_transition,
                 ExperimentKind::rip_constant, ExperimentKind::lemma1})
    if (name == to_string(k)) return k;
  throw ConfigError("experiment", "unknown experiment '" + name + "'");
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Strict object reader: every key must be consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  template <typename T>
  std::optional<T> opt(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(join(path_, key), "has the wrong type");
    }
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    if (auto v = opt<T>(key)) target = *v;
  }

  const json* sub(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
    return &j_.at(key);
  }

  std::string field(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(field(item.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Re-raises a ConfigError with its field placed under `prefix`.
template <typename F>
void with_prefix(const std::string& prefix, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    const auto colon = what.find(": ");
    throw ConfigError(join(prefix, e.field()),
                      colon == std::string::npos ? what : what.substr(colon + 2));
  }
}

json weights_to_json(const WeightPattern& p) {
  json j;
  j["kind"] = to_string(p.kind);
  if (!p.support.empty()) j["support"] = p.support;
  if (p.kind == WeightKind::single_delay) j["delay"] = p.delay;
  if (p.kind == WeightKind::spiking) {
    j["spike_fraction"] = p.spike_fraction;
    j["spike_mass"] = p.spike_mass;
  }
  if (p.kind == WeightKind::custom) j["mass"] = p.mass;
  return j;
}

WeightPattern weights_from_json(const json& j, const std::string& path) {
  Reader r(j, path);
  WeightPattern p;
  if (auto kind = r.opt<std::string>("kind")) {
    with_prefix(path, [&] {
      try {
        p.kind = parse_weight_kind(*kind);
      } catch (const ConfigError&) {
        throw ConfigError("kind", "unknown weight pattern '" + *kind + "'");
      }
    });
  }
  r.read("support", p.support);
  r.read("delay", p.delay);
  r.read("spike_fraction", p.spike_fraction);
  r.read("spike_mass", p.spike_mass);
  r.read("mass", p.mass);
  r.finish();
  return p;
}

json env_to_json(const EnvConfig& e) {
  json j;
  j["d"] = e.d;
  j["K"] = e.K;
  j["h"] = e.h;
  j["s"] = e.s;
  j["T"] = e.T;
  if (e.theta) j["theta"] = std::vector<double>(e.theta->begin(), e.theta->end());
  j["w_pattern"] = weights_to_json(e.w_pattern);
  j["noise_std"] = e.noise_std;
  j["context_dist"] = to_string(e.context_dist);
  return j;
}

EnvConfig env_from_json(const json& j, const std::string& path) {
  Reader r(j, path);
  EnvConfig e;
  r.read("d", e.d);
  r.read("K", e.K);
  r.read("h", e.h);
  r.read("s", e.s);
  r.read("T", e.T);
  if (auto theta = r.opt<std::vector<double>>("theta")) {
    e.theta = Eigen::Map<const VectorXd>(theta->data(), static_cast<Index>(theta->size()));
  }
  if (const json* w = r.sub("w_pattern")) e.w_pattern = weights_from_json(*w, r.field("w_pattern"));
  r.read("noise_std", e.noise_std);
  if (auto dist = r.opt<std::string>("context_dist")) {
    with_prefix(path, [&] { e.context_dist = parse_context_dist(*dist); });
  }
  r.finish();
  return e;
}

json params_to_json(const AgentParams& p) {
  return json{{"L", p.L},
              {"gamma", p.gamma},
              {"lambda_c", p.lambda_c},
              {"lasso_tol", p.lasso_tol},
              {"lasso_max_iter", p.lasso_max_iter},
              {"warm_start", p.warm_start},
              {"dense_limit", p.dense_limit},
              {"sagd_beta", p.sagd_beta},
              {"sagd_eps", p.sagd_eps},
              {"sagd_max_steps", p.sagd_max_steps},
              {"ucb_ridge", p.ucb_ridge},
              {"ucb_alpha", p.ucb_alpha}};
}

AgentParams params_from_json(const json& j, const std::string& path) {
  Reader r(j, path);
  AgentParams p;
  r.read("L", p.L);
  r.read("gamma", p.gamma);
  r.read("lambda_c", p.lambda_c);
  r.read("lasso_tol", p.lasso_tol);
  r.read("lasso_max_iter", p.lasso_max_iter);
  r.read("warm_start", p.warm_start);
  r.read("dense_limit", p.dense_limit);
  r.read("sagd_beta", p.sagd_beta);
  r.read("sagd_eps", p.sagd_eps);
  r.read("sagd_max_steps", p.sagd_max_steps);
  r.read("ucb_ridge", p.ucb_ridge);
  r.read("ucb_alpha", p.ucb_alpha);
  r.finish();
  return p;
}

void validate_params(const AgentParams& p, const std::string& path) {
  auto fail = [&](const char* key, const char* msg) { throw ConfigError(join(path, key), msg); };
  if (p.L < 0) fail("L", "must be >= 0 (0 selects the default)");
  if (!(p.gamma > 0 && p.gamma < 1)) fail("gamma", "must lie in (0, 1)");
  if (!(p.lambda_c >= 0) || !std::isfinite(p.lambda_c)) fail("lambda_c", "must be finite and >= 0");
  if (!(p.lasso_tol > 0)) fail("lasso_tol", "must be positive");
  if (p.lasso_max_iter < 1) fail("lasso_max_iter", "must be >= 1");
  if (p.dense_limit < 0) fail("dense_limit", "must be >= 0");
  if (!(p.sagd_beta > 0)) fail("sagd_beta", "must be positive");
  if (!(p.sagd_eps >= 0)) fail("sagd_eps", "must be >= 0");
  if (p.sagd_max_steps < 0) fail("sagd_max_steps", "must be >= 0");
  if (!(p.ucb_ridge > 0)) fail("ucb_ridge", "must be positive");
  if (!(p.ucb_alpha >= 0)) fail("ucb_alpha", "must be >= 0");
}

template <typename E, typename F>
std::vector<std::string> names_of(const std::vector<E>& v, F&& name) {
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(name(e));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// JSON

json to_json(const ExperimentSpec& spec) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = to_string(spec.experiment);
  j["trials"] = spec.trials;
  j["base_seed"] = spec.base_seed;
  j["output_dir"] = spec.output_dir;
  if (!spec.defaulted.empty()) j["defaulted"] = spec.defaulted;
  switch (spec.experiment) {
    case ExperimentKind::bandit: {
      j["env"] = env_to_json(spec.env);
      json agents = json::array();
      for (const auto& a : spec.agents) {
        json ja{{"name", a.name}, {"kind", to_string(a.kind)}, {"params", params_to_json(a.params)}};
        if (a.w_pattern) ja["w_pattern"] = weights_to_json(*a.w_pattern);
        agents.push_back(ja);
      }
      j["agents"] = agents;
      break;
    }
    case ExperimentKind::phase_transition: {
      const auto& p = spec.phase_transition;
      j["phase_transition"] = {
          {"ensembles", names_of(p.ensembles, [](EnsembleKind k) { return std::string(to_string(k)); })},
          {"dist", to_string(p.dist)},
          {"d", p.d},
          {"h", p.h},
          {"s_list", p.s_list},
          {"m_grid", p.m_grid},
          {"max_iter", p.max_iter}};
      break;
    }
    case ExperimentKind::rip_constant: {
      const auto& r = spec.rip_constant;
      j["rip_constant"] = {{"ensemble", to_string(r.kind)},
                           {"dist", to_string(r.dist)},
                           {"d", r.d},
                           {"n", r.n},
                           {"s_list", r.s_list},
                           {"m_grid", r.m_grid},
                           {"support_samples", r.support_samples}};
      break;
    }
    case ExperimentKind::lemma1:
      j["lemma1"] = {{"p_list", spec.lemma1.p_list}};
      break;
  }
  return j;
}

ExperimentSpec spec_from_json(const json& j) {
  Reader r(j, "");
  ExperimentSpec spec;
  const auto version = r.opt<int>("schema_version");
  if (!version) throw ConfigError("schema_version", "is required");
  if (*version != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version " + std::to_string(*version));
  }
  if (auto kind = r.opt<std::string>("experiment")) spec.experiment = parse_experiment_kind(*kind);
  r.read("trials", spec.trials);
  r.read("base_seed", spec.base_seed);
  r.read("output_dir", spec.output_dir);
  r.read("defaulted", spec.defaulted);
  if (const json* env = r.sub("env")) spec.env = env_from_json(*env, "env");

  if (const json* agents = r.sub("agents")) {
    if (!agents->is_array()) throw ConfigError("agents", "must be an array");
    for (std::size_t i = 0; i < agents->size(); ++i) {
      const std::string path = "agents[" + std::to_string(i) + "]";
      Reader ar((*agents)[i], path);
      AgentSpec a;
      ar.read("name", a.name);
      if (auto kind = ar.opt<std::string>("kind")) {
        with_prefix(path, [&] { a.kind = parse_agent_kind(*kind); });
      }
      if (const json* p = ar.sub("params")) a.params = params_from_json(*p, ar.field("params"));
      if (const json* w = ar.sub("w_pattern")) a.w_pattern = weights_from_json(*w, ar.field("w_pattern"));
      ar.finish();
      spec.agents.push_back(std::move(a));
    }
  }

  if (const json* pt = r.sub("phase_transition")) {
    Reader pr(*pt, "phase_transition");
    auto& p = spec.phase_transition;
    if (auto ens = pr.opt<std::vector<std::string>>("ensembles")) {
      p.ensembles.clear();
      for (const auto& e : *ens) {
        try {
          p.ensembles.push_back(parse_ensemble_kind(e));
        } catch (const std::invalid_argument& err) {
          throw ConfigError("phase_transition.ensembles", err.what());
        }
      }
    }
    if (auto dist = pr.opt<std::string>("dist")) {
      try {
        p.dist = parse_generator_dist(*dist);
      } catch (const std::invalid_argument& err) {
        throw ConfigError("phase_transition.dist", err.what());
      }
    }
    pr.read("d", p.d);
    pr.read("h", p.h);
    pr.read("s_list", p.s_list);
    pr.read("m_grid", p.m_grid);
    pr.read("max_iter", p.max_iter);
    pr.finish();
  }

  if (const json* rc = r.sub("rip_constant")) {
    Reader rr(*rc, "rip_constant");
    auto& c = spec.rip_constant;
    if (auto ens = rr.opt<std::string>("ensemble")) {
      try {
        c.kind = parse_ensemble_kind(*ens);
      } catch (const std::invalid_argument& err) {
        throw ConfigError("rip_constant.ensemble", err.what());
      }
    }
    if (auto dist = rr.opt<std::string>("dist")) {
      try {
        c.dist = parse_generator_dist(*dist);
      } catch (const std::invalid_argument& err) {
        throw ConfigError("rip_constant.dist", err.what());
      }
    }
    rr.read("d", c.d);
    rr.read("n", c.n);
    rr.read("s_list", c.s_list);
    rr.read("m_grid", c.m_grid);
    rr.read("support_samples", c.support_samples);
    rr.finish();
  }

  if (const json* l1 = r.sub("lemma1")) {
    Reader lr(*l1, "lemma1");
    lr.read("p_list", spec.lemma1.p_list);
    lr.finish();
  }
  r.finish();
  spec.validate();
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return spec_from_json(j);
}

void ExperimentSpec::validate() const {
  if (trials < 1) throw ConfigError("trials", "must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  switch (experiment) {
    case ExperimentKind::bandit: {
      with_prefix("env", [&] { env.validate(); });
      if (agents.empty()) throw ConfigError("agents", "at least one agent is required");
      std::set<std::string> names;
      for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto& a = agents[i];
        const std::string path = "agents[" + std::to_string(i) + "]";
        if (a.name.empty()) throw ConfigError(path + ".name", "must not be empty");
        if (a.name.find_first_of("/\\ ") != std::string::npos || a.name == "." || a.name == "..") {
          throw ConfigError(path + ".name", "must be usable as a file name");
        }
        if (!names.insert(a.name).second) {
          throw ConfigError(path + ".name", "duplicate agent name '" + a.name + "'");
        }
        if (a.kind == AgentKind::oracle) {
          throw ConfigError(path + ".kind", "the oracle agent is harness-internal");
        }
        validate_params(a.params, path + ".params");
        if (a.w_pattern) {
          EnvConfig probe = env;
          probe.w_pattern = *a.w_pattern;
          try {
            probe.validate();
          } catch (const ConfigError& e) {
            const std::string f = e.field();
            const std::string rest = f.rfind("w_pattern", 0) == 0 ? f : "w_pattern";
            const std::string what = e.what();
            throw ConfigError(path + "." + rest, what.substr(what.find(": ") + 2));
          }
        }
      }
      break;
    }
    case ExperimentKind::phase_transition: {
      const auto& p = phase_transition;
      if (p.ensembles.empty()) throw ConfigError("phase_transition.ensembles", "must not be empty");
      if (p.d < 1 || p.h < 1) throw ConfigError("phase_transition.d", "d and h must be >= 1");
      if (p.s_list.empty()) throw ConfigError("phase_transition.s_list", "must not be empty");
      for (long s : p.s_list)
        if (s < 1 || s > p.h) throw ConfigError("phase_transition.s_list", "entries must lie in [1, h]");
      if (p.m_grid.empty()) throw ConfigError("phase_transition.m_grid", "must not be empty");
      for (auto kind : p.ensembles) {
        const MeasurementEnsemble ens{kind, p.dist, 0, p.d, p.h};
        for (long m : p.m_grid)
          if (m < 0 || m > ens.max_rows()) {
            throw ConfigError("phase_transition.m_grid",
                              "m = " + std::to_string(m) + " outside [0, " +
                                  std::to_string(ens.max_rows()) + "] for " + to_string(kind));
          }
      }
      if (p.max_iter < 1) throw ConfigError("phase_transition.max_iter", "must be >= 1");
      break;
    }
    case ExperimentKind::rip_constant: {
      const auto& c = rip_constant;
      if (c.d < 1 || c.n < 1) throw ConfigError("rip_constant.d", "d and n must be >= 1");
      if (c.s_list.empty()) throw ConfigError("rip_constant.s_list", "must not be empty");
      for (long s : c.s_list)
        if (s < 1 || s > c.d * c.n) throw ConfigError("rip_constant.s_list", "entries must lie in [1, d*n]");
      if (c.m_grid.empty()) throw ConfigError("rip_constant.m_grid", "must not be empty");
      const MeasurementEnsemble ens{c.kind, c.dist, 0, c.d, c.n};
      for (long m : c.m_grid)
        if (m < 1 || m > ens.max_rows()) throw ConfigError("rip_constant.m_grid", "m outside [1, max rows]");
      if (c.support_samples < 1) throw ConfigError("rip_constant.support_samples", "must be >= 1");
      break;
    }
    case ExperimentKind::lemma1: {
      if (lemma1.p_list.empty()) throw ConfigError("lemma1.p_list", "must not be empty");
      for (long p : lemma1.p_list) {
        bool composite = false;
        for (long f = 2; f * f <= p; ++f) composite = composite || p % f == 0;
        if (!composite) throw ConfigError("lemma1.p_list", std::to_string(p) + " is not composite");
      }
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Presets

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig2",         "fig4",
                                              "fig5_flat",    "fig5_spiking",
                                              "appendix_random_w", "appendix_single_w",
                                              "ripconst",     "lemma1"};
  return names;
}

const std::vector<long>& preset_s_sweep() {
  static const std::vector<long> s{5, 10, 25, 50};
  return s;
}

bool preset_takes_s(const std::string& name) {
  return name == "fig5_flat" || name == "fig5_spiking" || name == "appendix_random_w";
}

namespace {

// Regularization scale used by every preset: the bare formulas assume unit
// noise and zero every estimate at these sizes.
constexpr double kPresetLambdaC = 0.004;

std::vector<long> fig4_positions() { return {0, 3, 7, 12, 18, 25, 33, 42, 52, 63}; }

WeightPattern fig4_pattern(long h, bool early) {
  WeightPattern p;
  p.kind = WeightKind::custom;
  p.mass.assign(static_cast<std::size_t>(h), 0.0);
  for (long pos : fig4_positions()) {
    p.mass[static_cast<std::size_t>(early ? pos : h - 1 - pos)] = 0.1;
  }
  return p;
}

ExperimentSpec bandit_comparison(const std::string& name, WeightPattern pattern, long s) {
  ExperimentSpec spec;
  spec.experiment = ExperimentKind::bandit;
  spec.env.d = 5;
  spec.env.K = 10;
  spec.env.h = 100;
  spec.env.T = 2000;
  spec.env.s = s;
  spec.env.w_pattern = std::move(pattern);
  spec.trials = 10;
  spec.output_dir = "out/" + name;
  AgentParams params;
  params.lambda_c = kPresetLambdaC;
  for (auto kind : {AgentKind::ad_lasso, AgentKind::sa_gd, AgentKind::sw_mp, AgentKind::ucb_mp}) {
    spec.agents.push_back({to_string(kind), kind, params, std::nullopt});
  }
  spec.defaulted = {"env.K", "env.noise_std", "env.context_dist", "agents.params.lambda_c",
                    "agents.params.gamma", "agents.params.L", "trials"};
  return spec;
}

}  // namespace

ExperimentSpec preset(const std::string& name, std::optional<long> s) {
  if (s && !preset_takes_s(name)) {
    throw ConfigError("s", "preset '" + name + "' does not take a sparsity");
  }
  ExperimentSpec spec;
  if (name == "fig2") {
    spec.experiment = ExperimentKind::phase_transition;
    auto& p = spec.phase_transition;
    for (long m = 0; m <= p.d * p.h / 2; m += 10) p.m_grid.push_back(m);
    spec.trials = 50;
    spec.output_dir = "out/fig2";
    spec.defaulted = {"phase_transition.s_list", "phase_transition.m_grid", "phase_transition.dist",
                      "trials"};
  } else if (name == "fig4") {
    spec.experiment = ExperimentKind::bandit;
    spec.env.d = 5;
    spec.env.K = 10;
    spec.env.h = 1000;
    spec.env.T = 999;
    spec.env.s = 10;
    spec.env.w_pattern = fig4_pattern(spec.env.h, true);
    spec.trials = 10;
    spec.output_dir = "out/fig4";
    AgentParams params;
    params.lambda_c = kPresetLambdaC;
    spec.agents.push_back({"dlasso_w1", AgentKind::doubling_lasso, params, fig4_pattern(1000, true)});
    spec.agents.push_back({"dlasso_w2", AgentKind::doubling_lasso, params, fig4_pattern(1000, false)});
    spec.defaulted = {"env.d", "env.K", "env.noise_std", "env.context_dist", "agents.w_pattern",
                      "agents.params.lambda_c", "agents.params.gamma", "agents.params.L"};
  } else if (name == "fig5_flat") {
    spec = bandit_comparison(name, WeightPattern{}, s.value_or(5));
  } else if (name == "fig5_spiking") {
    WeightPattern p;
    p.kind = WeightKind::spiking;
    spec = bandit_comparison(name, p, s.value_or(5));
    spec.defaulted.push_back("env.w_pattern.spike_mass");
  } else if (name == "appendix_random_w") {
    WeightPattern p;
    p.kind = WeightKind::random;
    spec = bandit_comparison(name, p, s.value_or(5));
  } else if (name == "appendix_single_w") {
    WeightPattern p;
    p.kind = WeightKind::single_delay;
    spec = bandit_comparison(name, p, 1);
  } else if (name == "ripconst") {
    spec.experiment = ExperimentKind::rip_constant;
    auto& c = spec.rip_constant;
    for (long m = 10; m <= c.n; m += 10) c.m_grid.push_back(m);
    spec.trials = 5;
    spec.output_dir = "out/ripconst";
    spec.defaulted = {"rip_constant.d", "rip_constant.n", "rip_constant.s_list",
                      "rip_constant.m_grid", "trials"};
  } else if (name == "lemma1") {
    spec.experiment = ExperimentKind::lemma1;
    spec.trials = 10000;
    spec.output_dir = "out/lemma1";
  } else {
    throw ConfigError("preset", "unknown preset '" + name + "'");
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Trials

std::uint64_t env_seed(std::uint64_t base_seed, long trial) {
  return combine_keys(combine_keys(base_seed, hash_name("env")), static_cast<std::uint64_t>(trial));
}

std::uint64_t agent_seed(std::uint64_t base_seed, const std::string& agent, long trial) {
  return combine_keys(combine_keys(base_seed, hash_name(agent)), static_cast<std::uint64_t>(trial));
}

namespace {

EnvConfig trial_env(const ExperimentSpec& spec, const std::optional<WeightPattern>& w, long trial) {
  EnvConfig cfg = spec.env;
  cfg.seed = env_seed(spec.base_seed, trial);
  if (w) cfg.w_pattern = *w;
  return cfg;
}

}  // namespace

TrialResult run_trial(const ExperimentSpec& spec, const AgentSpec& agent, long trial) {
  TrialResult res;
  res.agent = agent.name;
  res.trial = trial;
  try {
    Environment env(trial_env(spec, agent.w_pattern, trial));
    const auto& c = env.config();
    auto player = make_agent(agent.kind, ProblemShape{c.d, c.K, c.h, c.s, c.T}, agent.params,
                             agent_seed(spec.base_seed, agent.name, trial));
    res.cum_regret.reserve(static_cast<std::size_t>(c.T));
    double total = 0;
    while (!env.done()) {
      total += play_round(env, *player).instant_regret;
      res.cum_regret.push_back(total);
    }
    res.epochs = player->epochs();
    for (const auto& e : res.epochs) res.epoch_sin_angle.push_back(sin_angle(e.theta_hat, env.theta()));
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  return res;
}

TrialResult run_oracle_trial(const ExperimentSpec& spec, long trial) {
  TrialResult res;
  res.agent = "oracle";
  res.trial = trial;
  Environment env(trial_env(spec, std::nullopt, trial));
  auto player = make_oracle_agent(env.theta(), agent_seed(spec.base_seed, "oracle", trial));
  double total = 0;
  while (!env.done()) {
    total += play_round(env, *player).instant_regret;
    res.cum_regret.push_back(total);
  }
  return res;
}

Aggregate aggregate_traces(const std::vector<const std::vector<double>*>& traces) {
  Aggregate agg;
  agg.count = static_cast<long>(traces.size());
  if (traces.empty()) return agg;
  const std::size_t len = traces.front()->size();
  for (const auto* t : traces)
    if (t->size() != len) throw std::invalid_argument("aggregate_traces: trace lengths differ");
  const double n = static_cast<double>(traces.size());
  agg.mean.assign(len, 0.0);
  agg.stderr_.assign(len, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    double sum = 0;
    for (const auto* t : traces) sum += (*t)[i];
    const double mean = sum / n;
    double ss = 0;
    for (const auto* t : traces) ss += ((*t)[i] - mean) * ((*t)[i] - mean);
    agg.mean[i] = mean;
    agg.stderr_[i] = traces.size() > 1 ? std::sqrt(ss / (n - 1)) / std::sqrt(n) : 0.0;
  }
  return agg;
}

// ---------------------------------------------------------------------------
// Output

void write_regret_csv(std::ostream& out, const std::vector<double>& cum_regret) {
  out << "t,cum_regret\n";
  for (std::size_t i = 0; i < cum_regret.size(); ++i) {
    out << i + 1 << ',' << format_number(cum_regret[i]) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const Aggregate& agg) {
  out << "t,mean,stderr\n";
  for (std::size_t i = 0; i < agg.mean.size(); ++i) {
    out << i + 1 << ',' << format_number(agg.mean[i]) << ',' << format_number(agg.stderr_[i])
        << '\n';
  }
}

void write_epochs_csv(std::ostream& out, const TrialResult& r) {
  out << "epoch,t,full_horizon,lambda,iterations,converged,support,located_lag,loss,flagged,"
         "sin_angle,note\n";
  for (std::size_t i = 0; i < r.epochs.size(); ++i) {
    const auto& e = r.epochs[i];
    out << e.epoch << ',' << e.t << ',' << (e.full_horizon ? 1 : 0) << ','
        << format_number(e.lambda) << ',' << e.iterations << ',' << (e.converged ? 1 : 0) << ','
        << e.support << ',' << e.located_lag << ',' << format_number(e.loss) << ','
        << (e.flagged ? 1 : 0) << ',' << format_number(r.epoch_sin_angle[i]) << ',' << e.note
        << '\n';
  }
}

std::string config_hash(const ExperimentSpec& spec) {
  json j = to_json(spec);
  j.erase("output_dir");
  const std::uint64_t h = hash_name(j.dump());
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

unsigned default_workers() {
  if (const char* env = std::getenv("LHB_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string trial_stem(const std::string& agent, long trial) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%04ld", trial);
  return agent + buf;
}

void write_file(const std::filesystem::path& path, const std::string& body,
                std::vector<std::filesystem::path>& files) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
  files.push_back(path);
}

template <typename F>
void parallel_for(std::size_t count, unsigned workers, F&& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

void run_bandit(const ExperimentSpec& spec, unsigned workers, RunSummary& summary) {
  const std::size_t na = spec.agents.size();
  const std::size_t nt = static_cast<std::size_t>(spec.trials);
  std::vector<TrialResult> results(na * nt);
  parallel_for(results.size(), workers, [&](std::size_t i) {
    results[i] = run_trial(spec, spec.agents[i / nt], static_cast<long>(i % nt));
  });

  for (std::size_t a = 0; a < na; ++a) {
    std::vector<const std::vector<double>*> ok;
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& r = results[a * nt + t];
      const auto stem = trial_stem(r.agent, r.trial);
      if (r.error) {
        summary.failures.push_back(stem + ": " + *r.error);
        continue;
      }
      std::ostringstream trace, epochs;
      write_regret_csv(trace, r.cum_regret);
      write_epochs_csv(epochs, r);
      write_file(summary.output_dir / (stem + ".csv"), trace.str(), summary.files);
      write_file(summary.output_dir / (stem + "_epochs.csv"), epochs.str(), summary.files);
      ok.push_back(&r.cum_regret);
    }
    std::ostringstream agg;
    write_aggregate_csv(agg, aggregate_traces(ok));
    write_file(summary.output_dir / (spec.agents[a].name + "_agg.csv"), agg.str(), summary.files);
  }
}

}  // namespace

RunSummary run_experiment(const ExperimentSpec& spec, unsigned workers) {
  spec.validate();
  if (workers == 0) workers = default_workers();
  const auto start = std::chrono::steady_clock::now();
  RunSummary summary;
  summary.output_dir = spec.output_dir;
  std::filesystem::create_directories(summary.output_dir);

  const std::uint64_t seed = combine_keys(spec.base_seed, hash_name(to_string(spec.experiment)));
  switch (spec.experiment) {
    case ExperimentKind::bandit:
      run_bandit(spec, workers, summary);
      break;
    case ExperimentKind::phase_transition: {
      const auto& p = spec.phase_transition;
      std::vector<std::vector<PhaseTransitionPoint>> tables(p.ensembles.size());
      parallel_for(p.ensembles.size(), workers, [&](std::size_t i) {
        PhaseTransitionConfig cfg;
        cfg.kind = p.ensembles[i];
        cfg.dist = p.dist;
        cfg.d = p.d;
        cfg.h = p.h;
        cfg.s_list = p.s_list;
        cfg.m_grid = p.m_grid;
        cfg.trials = spec.trials;
        cfg.seed = seed;
        cfg.max_iter = p.max_iter;
        tables[i] = phase_transition_sweep(cfg);
      });
      for (std::size_t i = 0; i < tables.size(); ++i) {
        std::ostringstream out;
        write_phase_transition_csv(out, tables[i]);
        write_file(summary.output_dir /
                       (std::string("phase_transition_") + to_string(p.ensembles[i]) + ".csv"),
                   out.str(), summary.files);
      }
      break;
    }
    case ExperimentKind::rip_constant: {
      RipConstantConfig cfg = spec.rip_constant;
      cfg.trials = spec.trials;
      cfg.seed = seed;
      std::ostringstream out;
      write_rip_constant_csv(out, rip_constant_sweep(cfg));
      write_file(summary.output_dir / "rip_constant.csv", out.str(), summary.files);
      break;
    }
    case ExperimentKind::lemma1: {
      std::vector<Lemma1Result> rows(spec.lemma1.p_list.size());
      parallel_for(rows.size(), workers, [&](std::size_t i) {
        rows[i] = lemma1_witness(spec.lemma1.p_list[i], spec.trials, seed);
      });
      std::ostringstream out;
      write_lemma1_csv(out, rows);
      write_file(summary.output_dir / "lemma1.csv", out.str(), summary.files);
      break;
    }
  }

  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json meta;
  meta["schema_version"] = kSchemaVersion;
  meta["version"] = kVersion;
  meta["versions"] = {{"lhbandit", kVersion},
                      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
                      {"compiler", __VERSION__}};
  meta["config_hash"] = config_hash(spec);
  meta["config"] = to_json(spec);
  meta["defaulted"] = spec.defaulted;
  meta["wall_time_seconds"] = summary.wall_seconds;
  meta["workers"] = workers;
  meta["failures"] = summary.failures;
  std::vector<std::string> names;
  for (const auto& f : summary.files) names.push_back(f.filename().string());
  meta["files"] = names;
  std::ofstream(summary.output_dir / "metadata.json") << meta.dump(2) << '\n';
  return summary;
}

// ---------------------------------------------------------------------------

QDiagnostic diagnostic_q(const VectorXd& w, double mu) {
  if (w.size() == 0) throw std::invalid_argument("diagnostic_q: empty weight vector");
  if (!(mu > 0)) throw std::invalid_argument("diagnostic_q: mu must be positive");
  const double target = mu * mu;
  const double slack = 1e-12 * std::max(1.0, w.squaredNorm());
  if (target > w.squaredNorm() + slack) throw std::invalid_argument("mass unreachable");
  double prefix = 0;
  long q = w.size();
  for (Index i = 0; i < w.size(); ++i) {
    prefix += w(i) * w(i);
    if (prefix + slack >= target) {
      q = i + 1;
      break;
    }
  }
  QDiagnostic out;
  out.q = q;
  const double h = static_cast<double>(w.size());
  out.alpha = w.size() > 1 ? std::log(static_cast<double>(q)) / std::log(h) : 0.0;
  return out;
}

}  // namespace lhb
