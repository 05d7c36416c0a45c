#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lhb/env.hpp"
#include "lhb/group_lasso.hpp"
#include "lhb/linalg.hpp"
#include "lhb/rng.hpp"

namespace lhb {

// ---------------------------------------------------------------------------
// Epoch schedules

// One estimation epoch: rounds [start, end], inclusive, 1-based.
struct Epoch {
  int index = 0;       // i (partial-phi phase) or j (full-horizon phase), from 1
  long start = 0;
  long end = 0;
  bool full_horizon = false;  // estimates all h lags from the later half
};

// Doubling sequence of epoch ends.
//
// datapoor: T_i = 4 (2^i - 1) L, epoch i lasting 2^{i+1} L rounds.
// datarich: T~_j = (2^{j+1} - 1) h, epoch j lasting 2^j h rounds after round h.
struct EpochSchedule {
  enum class Kind { datapoor, datarich, adaptive };

  Kind kind = Kind::datapoor;
  long L = 0;
  long h = 0;
  std::vector<Epoch> epochs;

  std::vector<long> boundaries() const;

  // Epochs of the doubling scheme whose end does not exceed `limit`.
  static EpochSchedule datapoor(long L, long limit);
  // Full-horizon epochs T~_j <= T.
  static EpochSchedule datarich(long h, long T);
  // Datapoor epochs ending by round h, then datarich epochs up to T.
  static EpochSchedule adaptive(long L, long h, long T);
};

// max(s, min(s*d, h/8)), at least 1.
long practical_L(long s, long d, long h);

// Second and fourth quarters of doubling epoch i (each 2^{i-1} L rounds).
struct ChunkSelection {
  int epoch = 0;
  long quarter2_begin = 0, quarter2_end = 0;
  long quarter4_begin = 0, quarter4_end = 0;

  long length() const { return quarter2_end - quarter2_begin + 1; }
};

ChunkSelection chunk_selection(int epoch, long L);

// ---------------------------------------------------------------------------
// Interaction history

// Chosen contexts (column t-1 = xi_t) and rewards, as seen by an agent.
class History {
 public:
  History(long d, long capacity);

  void push(const Eigen::Ref<const VectorXd>& chosen, double reward);

  long rounds() const noexcept { return rounds_; }
  long dim() const noexcept { return static_cast<long>(contexts_.rows()); }
  // d x capacity; only the first rounds() columns are meaningful.
  const MatrixXd& contexts() const noexcept { return contexts_; }
  const VectorXd& rewards() const noexcept { return rewards_; }
  double reward(long t) const { return rewards_(t - 1); }

 private:
  MatrixXd contexts_;
  VectorXd rewards_;
  long rounds_ = 0;
};

// Differenced measurement system for one doubling epoch: rows of the
// fourth-quarter design minus rows of the second-quarter design, restricted
// to the first `column_blocks` lags, with the matching reward difference.
struct DifferenceSystem {
  MatrixXd barP;
  VectorXd barr;
};

DifferenceSystem build_difference_system(const History& history, const ChunkSelection& chunks,
                                         long column_blocks);

// ---------------------------------------------------------------------------
// Decision rules

// An argmax of <x_a, theta_hat>; exact ties are broken uniformly at random.
Index greedy_action(const MatrixXd& contexts, const VectorXd& theta_hat, KeyedRng& rng);

// Block column k* (1-based) whose normalized correlation
// ||Xi^k^T r|| / ||Xi^k||_F with the rewards is largest; ties go to the
// smallest k. Rows are the rounds in `times`.
long sw_mp_locate(const History& history, std::span<const long> times, long h);

// Least squares of the rewards at `times` on the contexts at lag k-1, with a
// 1e-8 ridge when the system is rank deficient.
VectorXd lagged_least_squares(const History& history, std::span<const long> times, long k);

// Orients a left singular vector so that Phi^T u has nonnegative sum. The
// lag weights are nonnegative, so this fixes the sign of theta.
VectorXd orient_by_weights(VectorXd u, const MatrixXd& phi);

// ---------------------------------------------------------------------------
// SA-GD objective

// f(theta, w) = sum_t (r_t - theta^T Z_t w)^2 over a set of rounds, where
// Z_t = [xi_t, ..., xi_{t-h+1}].
class RankOneLoss {
 public:
  RankOneLoss(MatrixXd rows, VectorXd rewards, long d);

  double value(const VectorXd& theta, const VectorXd& w) const;
  VectorXd grad_theta(const VectorXd& theta, const VectorXd& w) const;
  VectorXd grad_w(const VectorXd& theta, const VectorXd& w) const;
  long rows() const noexcept { return n_; }

 private:
  MatrixXd phi_gradient(const VectorXd& theta, const VectorXd& w) const;

  MatrixXd rows_;   // n x hd, block k = xi_{t-k}
  VectorXd rewards_;
  MatrixXd gram_;   // rows^T rows
  VectorXd corr_;   // rows^T r
  long d_;
  long n_;
};

struct AlternatingResult {
  VectorXd theta;
  VectorXd w;
  double loss = 0;
  long steps = 0;
  bool converged = false;
  bool diverged = false;
};

// Alternating gradient descent on RankOneLoss with step beta / n per step,
// then hard thresholding of w to its `s` largest-magnitude entries.
AlternatingResult alternating_descent(const RankOneLoss& loss, VectorXd theta, VectorXd w,
                                      double beta, double eps, long max_steps, long s);

// ---------------------------------------------------------------------------
// Agents

enum class AgentKind { doubling_lasso, ad_lasso, sa_gd, sw_mp, ucb_mp, oracle };

const char* to_string(AgentKind kind);
AgentKind parse_agent_kind(const std::string& name);

// Problem dimensions an agent is allowed to know.
struct ProblemShape {
  long d = 0;
  long K = 0;
  long h = 0;
  long s = 0;
  long T = 0;
};

struct AgentParams {
  long L = 0;                 // 0 selects practical_L
  double gamma = 0.1;
  double lambda_c = 1.0;      // multiplies both regularization formulas
  double lasso_tol = 1e-8;
  long lasso_max_iter = 5000;
  bool warm_start = true;
  long dense_limit = 10000;   // dense design when columns <= this

  double sagd_beta = 0.01;
  double sagd_eps = 1e-6;
  long sagd_max_steps = 2000;

  double ucb_ridge = 1.0;
  double ucb_alpha = 1.0;
};

// Per-epoch diagnostic record.
struct EpochRecord {
  int epoch = 0;
  long t = 0;
  bool full_horizon = false;
  double lambda = 0;
  long iterations = 0;
  bool converged = true;
  long support = 0;
  long located_lag = 0;  // baselines: k*, 1-based
  double loss = 0;       // SA-GD final loss
  bool flagged = false;
  std::string note;
  VectorXd theta_hat;
};

class Agent {
 public:
  virtual ~Agent() = default;

  // Chooses an arm for the current round given its contexts (d x K).
  virtual Index act(const MatrixXd& contexts) = 0;
  // Receives the reward of the arm chosen by the last act().
  virtual void observe(double reward) = 0;

  // Current estimate, zero or unit norm.
  virtual VectorXd theta_hat() const = 0;
  virtual const std::vector<EpochRecord>& epochs() const = 0;
};

std::unique_ptr<Agent> make_agent(AgentKind kind, const ProblemShape& shape,
                                  const AgentParams& params, std::uint64_t seed);

// Harness-only agent that plays greedily with the true theta.
std::unique_ptr<Agent> make_oracle_agent(const VectorXd& theta, std::uint64_t seed);

// One round: sample contexts, act, step, observe.
StepOutcome play_round(Environment& env, Agent& agent);

}  // namespace lhb
