#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lhb/linalg.hpp"
#include "lhb/rng.hpp"

namespace lhb {

// Invalid configuration value. `field()` names the offending field by its
// JSON path (e.g. "env.w_pattern.kind").
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class ContextDist { uniform, rademacher, truncated_gaussian };

enum class WeightKind { flat, spiking, random, single_delay, custom };

// How the hidden lag weights w are generated.
struct WeightPattern {
  WeightKind kind = WeightKind::flat;
  // Fixed support positions (0-based lags). Empty means uniformly random placement.
  std::vector<long> support;
  // single_delay: position of the only nonzero weight, -1 for random.
  long delay = -1;
  // spiking: fraction of support positions that carry `spike_mass` of the l1 mass.
  double spike_fraction = 0.2;
  double spike_mass = 0.8;
  // custom: the full weight vector (length h).
  std::vector<double> mass;
};

struct EnvConfig {
  long d = 5;
  long K = 10;
  long h = 100;
  long s = 5;
  long T = 2000;
  // Drawn uniformly on the unit sphere when absent.
  std::optional<VectorXd> theta;
  WeightPattern w_pattern;
  double noise_std = 0.1;
  ContextDist context_dist = ContextDist::uniform;
  std::uint64_t seed = 0;

  // Throws ConfigError on the first violated invariant.
  void validate() const;
};

// Materializes w for the given pattern. Deterministic in `rng`.
VectorXd make_weights(const WeightPattern& pattern, long h, long s, KeyedRng& rng);

// Uniform draw from the unit sphere in R^d.
VectorXd random_unit_vector(long d, KeyedRng& rng);

// K iid contexts (columns) with entries in [-1, 1].
MatrixXd draw_contexts(ContextDist dist, long d, long K, KeyedRng& rng);

struct StepOutcome {
  double reward = 0;
  double instant_regret = 0;
};

// The long-horizon reward model.
//
// r_t = sum_{i<h} w_i <xi_{t-i}, theta> + eps_t, where xi_t is the context of
// the arm played at round t and xi_j = 0 for j <= 0. Pseudo-regret at round
// t is ||w||_1 (<x_{t,a*}, theta> - <xi_t, theta>).
//
// Agents see only sample_contexts() and the reward returned by step(); the
// ground-truth accessors exist for the harness.
class Environment {
 public:
  explicit Environment(EnvConfig config);

  // Contexts of the upcoming round as a d x K matrix (one column per arm).
  // Repeated calls within a round return the same draw.
  const MatrixXd& sample_contexts();

  // Plays `action` for the current round and advances to the next.
  StepOutcome step(Index action);

  // Number of completed rounds.
  long round() const noexcept { return round_; }
  bool done() const noexcept { return round_ >= config_.T; }

  const EnvConfig& config() const noexcept { return config_; }
  const VectorXd& theta() const noexcept { return theta_; }
  const VectorXd& w() const noexcept { return w_; }

  // Chosen contexts of the last h rounds, most recent first (zero before round 1).
  MatrixXd recent_contexts() const;

 private:
  EnvConfig config_;
  VectorXd theta_;
  VectorXd w_;
  double w_l1_ = 0;
  std::vector<Index> w_support_;

  long round_ = 0;
  MatrixXd contexts_;
  bool contexts_ready_ = false;

  // Ring buffer over the last h chosen contexts.
  MatrixXd ring_;
  VectorXd ring_proj_;  // <xi, theta> per slot
  Index ring_head_ = 0;  // slot of the most recent context
};

// Cumulative pseudo-regret as a function of the round.
struct RegretTrace {
  std::string agent;
  long trial = 0;
  std::vector<double> cum_regret;  // entry t-1 holds R_t
};

// Prefix sums of per-round regret.
RegretTrace cumulative_regret(std::span<const double> instant_regret);

const char* to_string(ContextDist dist);
const char* to_string(WeightKind kind);
ContextDist parse_context_dist(const std::string& name);
WeightKind parse_weight_kind(const std::string& name);

}  // namespace lhb
