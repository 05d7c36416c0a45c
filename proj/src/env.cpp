#include "lhb/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace lhb {

namespace {

constexpr double kNormSlack = 1e-12;

std::vector<long> pick_support(const WeightPattern& p, long h, long s, KeyedRng& rng) {
  if (!p.support.empty()) return p.support;
  std::vector<long> all(static_cast<std::size_t>(h));
  std::iota(all.begin(), all.end(), 0L);
  std::vector<long> chosen;
  chosen.reserve(static_cast<std::size_t>(s));
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), s, rng);
  std::shuffle(chosen.begin(), chosen.end(), rng);
  return chosen;
}

}  // namespace

const char* to_string(ContextDist dist) {
  switch (dist) {
    case ContextDist::uniform: return "uniform";
    case ContextDist::rademacher: return "rademacher";
    case ContextDist::truncated_gaussian: return "truncated_gaussian";
  }
  return "?";
}

const char* to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::flat: return "flat";
    case WeightKind::spiking: return "spiking";
    case WeightKind::random: return "random";
    case WeightKind::single_delay: return "single_delay";
    case WeightKind::custom: return "custom";
  }
  return "?";
}

ContextDist parse_context_dist(const std::string& name) {
  if (name == "uniform") return ContextDist::uniform;
  if (name == "rademacher") return ContextDist::rademacher;
  if (name == "truncated_gaussian") return ContextDist::truncated_gaussian;
  throw ConfigError("context_dist", "unknown distribution '" + name + "'");
}

WeightKind parse_weight_kind(const std::string& name) {
  if (name == "flat") return WeightKind::flat;
  if (name == "spiking") return WeightKind::spiking;
  if (name == "random") return WeightKind::random;
  if (name == "single_delay") return WeightKind::single_delay;
  if (name == "custom") return WeightKind::custom;
  throw ConfigError("w_pattern.kind", "unknown weight pattern '" + name + "'");
}

VectorXd make_weights(const WeightPattern& p, long h, long s, KeyedRng& rng) {
  VectorXd w = VectorXd::Zero(h);
  switch (p.kind) {
    case WeightKind::flat: {
      for (long pos : pick_support(p, h, s, rng)) w(pos) = 1.0 / static_cast<double>(s);
      break;
    }
    case WeightKind::spiking: {
      const auto support = pick_support(p, h, s, rng);
      const long spikes = std::min<long>(
          s, static_cast<long>(std::ceil(p.spike_fraction * static_cast<double>(s) - 1e-12)));
      if (spikes >= s) {
        for (long pos : support) w(pos) = 1.0 / static_cast<double>(s);
        break;
      }
      for (long k = 0; k < s; ++k) {
        const auto pos = support[static_cast<std::size_t>(k)];
        w(pos) = k < spikes ? p.spike_mass / static_cast<double>(spikes)
                            : (1.0 - p.spike_mass) / static_cast<double>(s - spikes);
      }
      break;
    }
    case WeightKind::random: {
      const auto support = pick_support(p, h, s, rng);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (long pos : support) w(pos) = 1.0 - unif(rng);  // (0, 1]
      w /= w.sum();
      break;
    }
    case WeightKind::single_delay: {
      long pos = p.delay;
      if (pos < 0) pos = std::uniform_int_distribution<long>(0, h - 1)(rng);
      w(pos) = 1.0;
      break;
    }
    case WeightKind::custom: {
      for (long i = 0; i < h; ++i) w(i) = p.mass[static_cast<std::size_t>(i)];
      break;
    }
  }
  return w;
}

VectorXd random_unit_vector(long d, KeyedRng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXd v(d);
  do {
    for (long i = 0; i < d; ++i) v(i) = gauss(rng);
  } while (v.norm() == 0.0);
  return v.normalized();
}

MatrixXd draw_contexts(ContextDist dist, long d, long K, KeyedRng& rng) {
  MatrixXd x(d, K);
  switch (dist) {
    case ContextDist::uniform: {
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      for (Index k = 0; k < K; ++k)
        for (Index i = 0; i < d; ++i) x(i, k) = unif(rng);
      break;
    }
    case ContextDist::rademacher: {
      for (Index k = 0; k < K; ++k)
        for (Index i = 0; i < d; ++i) x(i, k) = (rng() >> 63) ? 1.0 : -1.0;
      break;
    }
    case ContextDist::truncated_gaussian: {
      std::normal_distribution<double> gauss(0.0, 0.5);
      for (Index k = 0; k < K; ++k)
        for (Index i = 0; i < d; ++i) {
          double v;
          do v = gauss(rng);
          while (std::abs(v) > 1.0);
          x(i, k) = v;
        }
      break;
    }
  }
  return x;
}

void EnvConfig::validate() const {
  if (d < 1) throw ConfigError("d", "must be >= 1");
  if (K < 1) throw ConfigError("K", "must be >= 1");
  if (h < 1) throw ConfigError("h", "must be >= 1");
  if (s < 1 || s > h) throw ConfigError("s", "must satisfy 1 <= s <= h");
  if (T < 1) throw ConfigError("T", "must be >= 1");
  if (!(noise_std >= 0) || !std::isfinite(noise_std)) {
    throw ConfigError("noise_std", "must be finite and nonnegative");
  }
  if (theta) {
    if (theta->size() != d) throw ConfigError("theta", "length must equal d");
    if (!theta->allFinite()) throw ConfigError("theta", "must be finite");
    if (theta->norm() > 1.0 + kNormSlack) throw ConfigError("theta", "l2 norm must be <= 1");
  }

  const WeightPattern& p = w_pattern;
  if (!p.support.empty()) {
    if (p.kind == WeightKind::custom || p.kind == WeightKind::single_delay) {
      throw ConfigError("w_pattern.support", "not used by this pattern kind");
    }
    if (static_cast<long>(p.support.size()) != s) {
      throw ConfigError("w_pattern.support", "must list exactly s positions");
    }
    std::vector<long> sorted = p.support;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("w_pattern.support", "positions must be distinct");
    }
    if (sorted.front() < 0 || sorted.back() >= h) {
      throw ConfigError("w_pattern.support", "positions must lie in [0, h)");
    }
  }
  if (p.kind == WeightKind::single_delay && p.delay >= h) {
    throw ConfigError("w_pattern.delay", "must lie in [0, h) or be -1");
  }
  if (p.kind == WeightKind::spiking) {
    if (!(p.spike_fraction > 0 && p.spike_fraction <= 1)) {
      throw ConfigError("w_pattern.spike_fraction", "must lie in (0, 1]");
    }
    if (!(p.spike_mass >= 0 && p.spike_mass <= 1)) {
      throw ConfigError("w_pattern.spike_mass", "must lie in [0, 1]");
    }
  }
  if (p.kind == WeightKind::custom) {
    if (static_cast<long>(p.mass.size()) != h) {
      throw ConfigError("w_pattern.mass", "length must equal h");
    }
    double l1 = 0;
    long nnz = 0;
    for (double v : p.mass) {
      if (!(v >= 0) || !std::isfinite(v)) {
        throw ConfigError("w_pattern.mass", "entries must be finite and nonnegative");
      }
      l1 += v;
      nnz += v != 0.0;
    }
    if (l1 > 1.0 + kNormSlack) throw ConfigError("w_pattern.mass", "l1 norm must be <= 1");
    if (nnz > s) throw ConfigError("w_pattern.mass", "more than s nonzero entries");
  }
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  KeyedRng theta_rng(config_.seed, Stream::setup, 0);
  theta_ = config_.theta ? *config_.theta : random_unit_vector(config_.d, theta_rng);
  KeyedRng w_rng(config_.seed, Stream::setup, 1);
  w_ = make_weights(config_.w_pattern, config_.h, config_.s, w_rng);
  w_l1_ = w_.lpNorm<1>();
  for (Index i = 0; i < w_.size(); ++i) {
    if (w_(i) != 0.0) w_support_.push_back(i);
  }
  ring_ = MatrixXd::Zero(config_.d, config_.h);
  ring_proj_ = VectorXd::Zero(config_.h);
}

const MatrixXd& Environment::sample_contexts() {
  if (done()) throw std::logic_error("sample_contexts: all rounds played");
  if (!contexts_ready_) {
    KeyedRng rng(config_.seed, Stream::contexts, static_cast<std::uint64_t>(round_ + 1));
    contexts_ = draw_contexts(config_.context_dist, config_.d, config_.K, rng);
    contexts_ready_ = true;
  }
  return contexts_;
}

StepOutcome Environment::step(Index action) {
  if (!contexts_ready_) throw std::logic_error("step: contexts for this round not sampled");
  if (action < 0 || action >= config_.K) {
    throw std::out_of_range("step: action " + std::to_string(action) + " outside [0, " +
                            std::to_string(config_.K) + ")");
  }
  const long t = round_ + 1;
  const VectorXd scores = contexts_.transpose() * theta_;

  ring_head_ = (ring_head_ + 1) % config_.h;
  ring_.col(ring_head_) = contexts_.col(action);
  ring_proj_(ring_head_) = scores(action);

  double mean = 0;
  for (Index lag : w_support_) {
    mean += w_(lag) * ring_proj_((ring_head_ - lag + config_.h) % config_.h);
  }
  double noise = 0;
  if (config_.noise_std > 0) {
    KeyedRng rng(config_.seed, Stream::noise, static_cast<std::uint64_t>(t));
    noise = std::normal_distribution<double>(0.0, config_.noise_std)(rng);
  }

  StepOutcome out;
  out.reward = mean + noise;
  out.instant_regret = w_l1_ * (scores.maxCoeff() - scores(action));
  round_ = t;
  contexts_ready_ = false;
  return out;
}

MatrixXd Environment::recent_contexts() const {
  MatrixXd out(config_.d, config_.h);
  for (Index lag = 0; lag < config_.h; ++lag) {
    out.col(lag) = ring_.col((ring_head_ - lag + config_.h) % config_.h);
  }
  return out;
}

RegretTrace cumulative_regret(std::span<const double> instant_regret) {
  RegretTrace trace;
  trace.cum_regret.resize(instant_regret.size());
  std::partial_sum(instant_regret.begin(), instant_regret.end(), trace.cum_regret.begin());
  return trace;
}

}  // namespace lhb
