#include "lhb/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lhb {

// ---------------------------------------------------------------------------
// Schedules

std::vector<long> EpochSchedule::boundaries() const {
  std::vector<long> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) out.push_back(e.end);
  return out;
}

EpochSchedule EpochSchedule::datapoor(long L, long limit) {
  if (L < 1) throw std::invalid_argument("datapoor schedule: L must be >= 1");
  EpochSchedule s;
  s.kind = Kind::datapoor;
  s.L = L;
  for (int i = 1;; ++i) {
    const long end = 4 * ((1L << i) - 1) * L;
    if (end > limit) break;
    s.epochs.push_back({i, 4 * ((1L << (i - 1)) - 1) * L + 1, end, false});
  }
  return s;
}

EpochSchedule EpochSchedule::datarich(long h, long T) {
  if (h < 1) throw std::invalid_argument("datarich schedule: h must be >= 1");
  EpochSchedule s;
  s.kind = Kind::datarich;
  s.h = h;
  for (int j = 1;; ++j) {
    const long end = ((1L << (j + 1)) - 1) * h;
    if (end > T) break;
    s.epochs.push_back({j, ((1L << j) - 1) * h + 1, end, true});
  }
  return s;
}

EpochSchedule EpochSchedule::adaptive(long L, long h, long T) {
  EpochSchedule s = datapoor(L, std::min(h, T));
  s.kind = Kind::adaptive;
  s.h = h;
  if (T > h) {
    const auto rich = datarich(h, T);
    s.epochs.insert(s.epochs.end(), rich.epochs.begin(), rich.epochs.end());
  }
  return s;
}

long practical_L(long s, long d, long h) {
  return std::max(1L, std::max(s, std::min(s * d, h / 8)));
}

ChunkSelection chunk_selection(int epoch, long L) {
  if (epoch < 1 || L < 1) throw std::invalid_argument("chunk_selection: epoch and L must be >= 1");
  const long q = (1L << (epoch - 1)) * L;
  const long start = 4 * ((1L << (epoch - 1)) - 1) * L + 1;
  ChunkSelection c;
  c.epoch = epoch;
  c.quarter2_begin = start + q;
  c.quarter2_end = start + 2 * q - 1;
  c.quarter4_begin = start + 3 * q;
  c.quarter4_end = start + 4 * q - 1;
  return c;
}

// ---------------------------------------------------------------------------
// History and measurement systems

History::History(long d, long capacity)
    : contexts_(MatrixXd::Zero(d, std::max(capacity, 1L))),
      rewards_(VectorXd::Zero(std::max(capacity, 1L))) {}

void History::push(const Eigen::Ref<const VectorXd>& chosen, double reward) {
  if (rounds_ == contexts_.cols()) {
    const Index grow = std::max<Index>(1, contexts_.cols());
    contexts_.conservativeResize(Eigen::NoChange, contexts_.cols() + grow);
    rewards_.conservativeResize(rewards_.size() + grow);
  }
  contexts_.col(rounds_) = chosen;
  rewards_(rounds_) = reward;
  ++rounds_;
}

namespace {

// vec(theta w^T): block k is w_k theta.
VectorXd rank_one_vec(const VectorXd& theta, const VectorXd& w) {
  VectorXd phi(theta.size() * w.size());
  for (Index k = 0; k < w.size(); ++k) phi.segment(k * theta.size(), theta.size()) = w(k) * theta;
  return phi;
}

std::vector<long> round_range(long first, long last) {
  std::vector<long> out(static_cast<std::size_t>(std::max(0L, last - first + 1)));
  std::iota(out.begin(), out.end(), first);
  return out;
}

VectorXd rewards_at(const History& history, std::span<const long> times) {
  VectorXd r(static_cast<Index>(times.size()));
  for (Index i = 0; i < r.size(); ++i) r(i) = history.reward(times[static_cast<std::size_t>(i)]);
  return r;
}

}  // namespace

DifferenceSystem build_difference_system(const History& history, const ChunkSelection& chunks,
                                         long column_blocks) {
  if (chunks.quarter4_end > history.rounds()) {
    throw std::out_of_range("build_difference_system: history has " +
                            std::to_string(history.rounds()) + " rounds, epoch " +
                            std::to_string(chunks.epoch) + " needs " +
                            std::to_string(chunks.quarter4_end));
  }
  const auto early = round_range(chunks.quarter2_begin, chunks.quarter2_end);
  const auto late = round_range(chunks.quarter4_begin, chunks.quarter4_end);
  const auto& ctx = history.contexts();
  DifferenceSystem sys;
  sys.barP = toeplitz_rows(ctx, std::span<const long>(late), column_blocks) -
             toeplitz_rows(ctx, std::span<const long>(early), column_blocks);
  sys.barr = rewards_at(history, late) - rewards_at(history, early);
  return sys;
}

// ---------------------------------------------------------------------------
// Decision rules

Index greedy_action(const MatrixXd& contexts, const VectorXd& theta_hat, KeyedRng& rng) {
  const VectorXd scores = contexts.transpose() * theta_hat;
  const double best = scores.maxCoeff();
  std::vector<Index> ties;
  for (Index a = 0; a < scores.size(); ++a) {
    if (scores(a) == best) ties.push_back(a);
  }
  if (ties.size() == 1) return ties.front();
  std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
  return ties[pick(rng)];
}

long sw_mp_locate(const History& history, std::span<const long> times, long h) {
  if (times.empty()) throw std::invalid_argument("sw_mp_locate: empty window");
  const auto& ctx = history.contexts();
  const VectorXd r = rewards_at(history, times);
  const auto corr = toeplitz_rmatvec(ctx, r, times, h);

  VectorXd sq_norms(history.rounds() + 1);
  sq_norms(0) = 0;
  for (long t = 1; t <= history.rounds(); ++t) sq_norms(t) = ctx.col(t - 1).squaredNorm();

  long best_k = 0;
  double best_score = 0;
  for (long k = 1; k <= h; ++k) {
    double fro2 = 0;
    for (long t : times) {
      const long src = t - k + 1;
      if (src >= 1) fro2 += sq_norms(src);
    }
    if (fro2 <= 0) continue;
    const double score = corr.block(k - 1).norm() / std::sqrt(fro2);
    if (score > best_score) {
      best_score = score;
      best_k = k;
    }
  }
  if (best_k == 0) throw NumericalError("sw_mp_locate: all-zero window");
  return best_k;
}

VectorXd lagged_least_squares(const History& history, std::span<const long> times, long k) {
  const long d = history.dim();
  MatrixXd x = MatrixXd::Zero(static_cast<Index>(times.size()), d);
  for (Index i = 0; i < x.rows(); ++i) {
    const long src = times[static_cast<std::size_t>(i)] - k + 1;
    if (src >= 1) x.row(i) = history.contexts().col(src - 1).transpose();
  }
  const VectorXd y = rewards_at(history, times);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  if (qr.rank() == d) return qr.solve(y);
  const MatrixXd normal = x.transpose() * x + 1e-8 * MatrixXd::Identity(d, d);
  return normal.ldlt().solve(x.transpose() * y);
}

VectorXd orient_by_weights(VectorXd u, const MatrixXd& phi) {
  if ((phi.transpose() * u).sum() < 0) u = -u;
  return u;
}

// ---------------------------------------------------------------------------
// SA-GD

RankOneLoss::RankOneLoss(MatrixXd rows, VectorXd rewards, long d)
    : rows_(std::move(rows)), rewards_(std::move(rewards)), d_(d), n_(rows_.rows()) {
  if (rewards_.size() != rows_.rows()) throw std::invalid_argument("RankOneLoss: row mismatch");
  if (d_ < 1 || rows_.cols() % d_ != 0) throw std::invalid_argument("RankOneLoss: bad block size");
  gram_ = MatrixXd::Zero(rows_.cols(), rows_.cols());
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(rows_.transpose());
  gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
  corr_ = rows_.transpose() * rewards_;
}

double RankOneLoss::value(const VectorXd& theta, const VectorXd& w) const {
  if (n_ == 0) return 0.0;
  const VectorXd phi = rank_one_vec(theta, w);
  return (rewards_ - rows_ * phi).squaredNorm();
}

MatrixXd RankOneLoss::phi_gradient(const VectorXd& theta, const VectorXd& w) const {
  const VectorXd phi = rank_one_vec(theta, w);
  const VectorXd g = 2.0 * (gram_ * phi - corr_);
  return Eigen::Map<const MatrixXd>(g.data(), d_, g.size() / d_);
}

VectorXd RankOneLoss::grad_theta(const VectorXd& theta, const VectorXd& w) const {
  if (n_ == 0) return VectorXd::Zero(theta.size());
  return phi_gradient(theta, w) * w;
}

VectorXd RankOneLoss::grad_w(const VectorXd& theta, const VectorXd& w) const {
  if (n_ == 0) return VectorXd::Zero(w.size());
  return phi_gradient(theta, w).transpose() * theta;
}

namespace {

void keep_top_s(VectorXd& w, long s) {
  if (s <= 0 || s >= w.size()) return;
  std::vector<Index> order(static_cast<std::size_t>(w.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(w(a)) > std::abs(w(b)); });
  for (std::size_t i = static_cast<std::size_t>(s); i < order.size(); ++i) w(order[i]) = 0;
}

constexpr long kRisingLimit = 50;

AlternatingResult descend(const RankOneLoss& loss, VectorXd theta, VectorXd w, double step,
                          double eps, long max_steps) {
  AlternatingResult out;
  double f = loss.value(theta, w);
  long rising = 0;
  if (f <= eps) out.converged = true;
  for (long k = 1; k <= max_steps && !out.converged; ++k) {
    theta -= step * loss.grad_theta(theta, w);
    w -= step * loss.grad_w(theta, w);
    const double next = loss.value(theta, w);
    out.steps = k;
    if (!std::isfinite(next)) {
      out.diverged = true;
      break;
    }
    rising = next > f ? rising + 1 : 0;
    if (rising >= kRisingLimit) {
      out.diverged = true;
      break;
    }
    // Stalled: further steps change nothing at working precision.
    const bool stalled = std::abs(f - next) <= 1e-12 * std::max(f, 1e-300);
    f = next;
    if (f <= eps || stalled) out.converged = true;
  }
  out.theta = std::move(theta);
  out.w = std::move(w);
  out.loss = f;
  return out;
}

}  // namespace

AlternatingResult alternating_descent(const RankOneLoss& loss, VectorXd theta, VectorXd w,
                                      double beta, double eps, long max_steps, long s) {
  if (!(beta > 0)) throw std::invalid_argument("alternating_descent: beta must be positive");
  const double step = beta / static_cast<double>(std::max(loss.rows(), 1L));
  AlternatingResult out = descend(loss, theta, w, step, eps, max_steps);
  if (out.diverged) {
    const long used = out.steps;
    out = descend(loss, theta, w, step / 2, eps, max_steps);
    out.steps += used;
    if (out.diverged) {
      out.theta = std::move(theta);
      out.w = std::move(w);
      out.loss = loss.value(out.theta, out.w);
      return out;
    }
  }
  keep_top_s(out.w, s);
  out.loss = loss.value(out.theta, out.w);
  return out;
}

// ---------------------------------------------------------------------------
// Agents

const char* to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::doubling_lasso: return "doubling_lasso";
    case AgentKind::ad_lasso: return "ad_lasso";
    case AgentKind::sa_gd: return "sa_gd";
    case AgentKind::sw_mp: return "sw_mp";
    case AgentKind::ucb_mp: return "ucb_mp";
    case AgentKind::oracle: return "oracle";
  }
  return "?";
}

AgentKind parse_agent_kind(const std::string& name) {
  for (auto k : {AgentKind::doubling_lasso, AgentKind::ad_lasso, AgentKind::sa_gd,
                 AgentKind::sw_mp, AgentKind::ucb_mp, AgentKind::oracle}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("kind", "unknown agent kind '" + name + "'");
}

namespace {

// Greedy play plus an epoch schedule; subclasses refit theta_hat at epoch ends.
class ScheduledAgent : public Agent {
 public:
  ScheduledAgent(const ProblemShape& shape, const AgentParams& params, std::uint64_t seed,
                 EpochSchedule schedule)
      : shape_(shape),
        params_(params),
        seed_(seed),
        schedule_(std::move(schedule)),
        history_(shape.d, shape.T),
        theta_(VectorXd::Zero(shape.d)) {}

  Index act(const MatrixXd& contexts) override {
    last_context_ = contexts;
    KeyedRng rng(seed_, Stream::ties, static_cast<std::uint64_t>(history_.rounds() + 1));
    last_action_ = choose(contexts, rng);
    return last_action_;
  }

  void observe(double reward) override {
    if (last_action_ < 0) throw std::logic_error("observe: act() was not called");
    history_.push(last_context_.col(last_action_), reward);
    last_action_ = -1;
    after_push(reward);
    if (next_ < schedule_.epochs.size() && history_.rounds() == schedule_.epochs[next_].end) {
      const Epoch e = schedule_.epochs[next_++];
      EpochRecord rec;
      rec.epoch = e.index;
      rec.t = e.end;
      rec.full_horizon = e.full_horizon;
      estimate(e, rec);
      rec.theta_hat = theta_;
      records_.push_back(std::move(rec));
    }
  }

  VectorXd theta_hat() const override { return theta_; }
  const std::vector<EpochRecord>& epochs() const override { return records_; }

 protected:
  virtual Index choose(const MatrixXd& contexts, KeyedRng& rng) {
    return greedy_action(contexts, theta_, rng);
  }
  virtual void after_push(double) {}
  virtual void estimate(const Epoch& e, EpochRecord& rec) = 0;

  std::vector<long> window(const Epoch& e) const { return round_range(e.start, e.end); }

  ProblemShape shape_;
  AgentParams params_;
  std::uint64_t seed_;
  EpochSchedule schedule_;
  History history_;
  VectorXd theta_;

 private:
  std::size_t next_ = 0;
  MatrixXd last_context_;
  Index last_action_ = -1;
  std::vector<EpochRecord> records_;
};

template <typename Op>
LassoSolution<double> run_lasso(Op op, VectorXd response, double lambda, long d, double scale,
                                const AgentParams& params,
                                const std::optional<BlockVector<double>>& warm) {
  LassoProblem<Op> problem{std::move(op), std::move(response), lambda, d, scale};
  return solve(problem, params.lasso_tol, params.lasso_max_iter, warm);
}

// Doubling Lasso; with `adaptive` the schedule switches to full-horizon
// estimates once h rounds have passed.
class LassoAgent : public ScheduledAgent {
 public:
  LassoAgent(const ProblemShape& shape, const AgentParams& params, std::uint64_t seed, long L,
             bool adaptive)
      : ScheduledAgent(shape, params, seed,
                       adaptive ? EpochSchedule::adaptive(L, shape.h, shape.T)
                                : EpochSchedule::datapoor(L, shape.T)),
        L_(L) {}

 protected:
  void estimate(const Epoch& e, EpochRecord& rec) override {
    const long d = shape_.d;
    std::vector<long> plus, minus;
    long blocks = 0;
    double scale = 0;
    if (!e.full_horizon) {
      const auto chunks = chunk_selection(e.index, L_);
      plus = round_range(chunks.quarter4_begin, chunks.quarter4_end);
      minus = round_range(chunks.quarter2_begin, chunks.quarter2_end);
      blocks = std::min(chunks.length(), shape_.h);
      scale = 1.0 / (2.0 * static_cast<double>(chunks.length()));
      rec.lambda = lambda_datapoor(e.index, L_, d, params_.gamma, params_.lambda_c);
    } else {
      const long m = (e.end - e.start + 1) / 2;
      plus = round_range(e.end - m + 1, e.end);
      blocks = shape_.h;
      scale = 1.0 / (2.0 * static_cast<double>(m));
      rec.lambda = lambda_datarich(e.index, shape_.h, d, params_.gamma, params_.lambda_c);
    }

    VectorXd response = rewards_at(history_, plus);
    if (!minus.empty()) response -= rewards_at(history_, minus);

    std::optional<BlockVector<double>> warm;
    if (params_.warm_start && phi_) warm = phi_->resized(blocks);

    ToeplitzOperator<double> implicit(history_.contexts(), plus, minus, blocks);
    const LassoSolution<double> sol =
        blocks * d <= params_.dense_limit
            ? run_lasso(DenseOperator<double>(implicit.to_dense()), std::move(response),
                        rec.lambda, d, scale, params_, warm)
            : run_lasso(implicit, std::move(response), rec.lambda, d, scale, params_, warm);

    rec.iterations = sol.iterations;
    rec.converged = sol.converged;
    rec.support = block_norm20(sol.phi_hat);
    phi_ = sol.phi_hat;
    if (!sol.converged) {
      rec.flagged = true;
      rec.note = "lasso did not converge; estimate kept";
      return;
    }
    if (rec.support == 0) {
      rec.note = "zero estimate; estimate kept";
      return;
    }
    const MatrixXd phi = matricize(sol.phi_hat);
    try {
      theta_ = orient_by_weights(top_singular_triplet(phi).left, phi);
    } catch (const ConvergenceError<Rank1Factorization<double>>& err) {
      theta_ = orient_by_weights(err.last_iterate().left, phi);
      rec.flagged = true;
      rec.note = "singular vector did not converge; last iterate used";
    }
  }

 private:
  long L_;
  std::optional<BlockVector<double>> phi_;
};

class SwMpAgent : public ScheduledAgent {
 public:
  using ScheduledAgent::ScheduledAgent;

 protected:
  void estimate(const Epoch& e, EpochRecord& rec) override {
    const auto times = window(e);
    try {
      rec.located_lag = sw_mp_locate(history_, times, shape_.h);
    } catch (const NumericalError&) {
      rec.flagged = true;
      rec.note = "all-zero window; estimate kept";
      return;
    }
    const VectorXd fit = lagged_least_squares(history_, times, rec.located_lag);
    if (fit.norm() > 0) theta_ = fit.normalized();
  }
};

// LinUCB on (context at lag k*, reward) pairs.
class UcbMpAgent : public ScheduledAgent {
 public:
  UcbMpAgent(const ProblemShape& shape, const AgentParams& params, std::uint64_t seed,
             EpochSchedule schedule)
      : ScheduledAgent(shape, params, seed, std::move(schedule)),
        gram_(params.ucb_ridge * MatrixXd::Identity(shape.d, shape.d)),
        b_(VectorXd::Zero(shape.d)),
        raw_(VectorXd::Zero(shape.d)) {}

 protected:
  Index choose(const MatrixXd& contexts, KeyedRng& rng) override {
    if (lag_ == 0) return greedy_action(contexts, theta_, rng);
    const Eigen::LDLT<MatrixXd> chol(gram_);
    const MatrixXd solved = chol.solve(contexts);
    VectorXd scores(contexts.cols());
    for (Index a = 0; a < contexts.cols(); ++a) {
      const double width = std::sqrt(std::max(0.0, contexts.col(a).dot(solved.col(a))));
      scores(a) = contexts.col(a).dot(raw_) + params_.ucb_alpha * width;
    }
    const double best = scores.maxCoeff();
    std::vector<Index> ties;
    for (Index a = 0; a < scores.size(); ++a)
      if (scores(a) == best) ties.push_back(a);
    if (ties.size() == 1) return ties.front();
    return ties[std::uniform_int_distribution<std::size_t>(0, ties.size() - 1)(rng)];
  }

  void after_push(double reward) override {
    if (lag_ == 0) return;
    const long src = history_.rounds() - lag_ + 1;
    if (src < 1) return;
    const auto x = history_.contexts().col(src - 1);
    gram_.noalias() += x * x.transpose();
    b_ += reward * x;
    refresh();
  }

  void estimate(const Epoch& e, EpochRecord& rec) override {
    const auto times = window(e);
    try {
      lag_ = sw_mp_locate(history_, times, shape_.h);
    } catch (const NumericalError&) {
      rec.flagged = true;
      rec.note = "all-zero window; estimate kept";
      return;
    }
    rec.located_lag = lag_;
    // Fresh confidence set for the new lag; it learns online from here on.
    gram_ = params_.ucb_ridge * MatrixXd::Identity(shape_.d, shape_.d);
    b_.setZero();
    raw_.setZero();
  }

 private:
  void refresh() {
    raw_ = gram_.ldlt().solve(b_);
    const double n = raw_.norm();
    theta_ = n > 0 ? VectorXd(raw_ / n) : VectorXd::Zero(shape_.d);
  }

  long lag_ = 0;
  MatrixXd gram_;
  VectorXd b_;
  VectorXd raw_;
};

class SaGdAgent : public ScheduledAgent {
 public:
  using ScheduledAgent::ScheduledAgent;

 protected:
  void estimate(const Epoch& e, EpochRecord& rec) override {
    const auto times = window(e);
    const long d = shape_.d, h = shape_.h;
    VectorXd theta0, w0;
    if (w_.size() == 0) {
      long k = 1;
      try {
        k = sw_mp_locate(history_, times, h);
      } catch (const NumericalError&) {
      }
      rec.located_lag = k;
      const VectorXd fit = lagged_least_squares(history_, times, k);
      const double n = fit.norm();
      theta0 = n > 0 ? VectorXd(fit / n) : VectorXd::Unit(d, 0);
      w0 = VectorXd::Zero(h);
      w0(k - 1) = n;
    } else {
      theta0 = theta_raw_;
      w0 = w_;
    }

    const RankOneLoss loss(toeplitz_rows(history_.contexts(), std::span<const long>(times), h),
                           rewards_at(history_, times), d);
    const AlternatingResult res = alternating_descent(
        loss, theta0, w0, params_.sagd_beta, params_.sagd_eps, params_.sagd_max_steps, shape_.s);
    rec.iterations = res.steps;
    rec.converged = res.converged;
    rec.loss = res.loss;
    rec.support = (res.w.array() != 0).count();
    if (res.diverged) {
      rec.flagged = true;
      rec.note = "descent diverged at halved step; estimate kept";
      return;
    }
    theta_raw_ = res.theta;
    w_ = res.w;
    const double n = res.theta.norm();
    if (n == 0) return;
    theta_ = res.theta / n;
    if (res.w.sum() < 0) theta_ = -theta_;
  }

 private:
  VectorXd theta_raw_;
  VectorXd w_;
};

class OracleAgent : public Agent {
 public:
  OracleAgent(VectorXd theta, std::uint64_t seed) : theta_(std::move(theta)), seed_(seed) {}

  Index act(const MatrixXd& contexts) override {
    KeyedRng rng(seed_, Stream::ties, static_cast<std::uint64_t>(++round_));
    return greedy_action(contexts, theta_, rng);
  }
  void observe(double) override {}
  VectorXd theta_hat() const override {
    const double n = theta_.norm();
    return n > 0 ? VectorXd(theta_ / n) : theta_;
  }
  const std::vector<EpochRecord>& epochs() const override { return records_; }

 private:
  VectorXd theta_;
  std::uint64_t seed_;
  std::uint64_t round_ = 0;
  std::vector<EpochRecord> records_;
};

}  // namespace

std::unique_ptr<Agent> make_agent(AgentKind kind, const ProblemShape& shape,
                                  const AgentParams& params, std::uint64_t seed) {
  if (shape.d < 1 || shape.K < 1 || shape.h < 1 || shape.s < 1 || shape.T < 1) {
    throw std::invalid_argument("make_agent: problem dimensions must be positive");
  }
  const long L = params.L > 0 ? params.L : practical_L(shape.s, shape.d, shape.h);
  switch (kind) {
    case AgentKind::doubling_lasso:
      return std::make_unique<LassoAgent>(shape, params, seed, L, false);
    case AgentKind::ad_lasso:
      return std::make_unique<LassoAgent>(shape, params, seed, L, true);
    case AgentKind::sa_gd:
      return std::make_unique<SaGdAgent>(shape, params, seed,
                                         EpochSchedule::adaptive(L, shape.h, shape.T));
    case AgentKind::sw_mp:
      return std::make_unique<SwMpAgent>(shape, params, seed,
                                         EpochSchedule::adaptive(L, shape.h, shape.T));
    case AgentKind::ucb_mp:
      return std::make_unique<UcbMpAgent>(shape, params, seed,
                                          EpochSchedule::adaptive(L, shape.h, shape.T));
    case AgentKind::oracle:
      throw std::invalid_argument("make_agent: the oracle needs the true theta");
  }
  throw std::invalid_argument("make_agent: unknown kind");
}

std::unique_ptr<Agent> make_oracle_agent(const VectorXd& theta, std::uint64_t seed) {
  return std::make_unique<OracleAgent>(theta, seed);
}

StepOutcome play_round(Environment& env, Agent& agent) {
  const MatrixXd& contexts = env.sample_contexts();
  const Index action = agent.act(contexts);
  const StepOutcome out = env.step(action);
  agent.observe(out.reward);
  return out;
}

}  // namespace lhb
