#include <doctest.h>

#include <random>

#include "lhb/agents.hpp"
#include "oracles.hpp"

using namespace lhb;

namespace {

MatrixXd uniform_matrix(long r, long c, std::uint64_t seed) {
  KeyedRng rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  MatrixXd m(r, c);
  for (long j = 0; j < c; ++j)
    for (long i = 0; i < r; ++i) m(i, j) = u(rng);
  return m;
}

History history_from(const MatrixXd& ctx, const VectorXd& rewards) {
  History h(ctx.rows(), 4);
  for (long t = 0; t < ctx.cols(); ++t) h.push(ctx.col(t), rewards(t));
  return h;
}

std::vector<long> rounds(long first, long last) {
  std::vector<long> out;
  for (long t = first; t <= last; ++t) out.push_back(t);
  return out;
}

struct Run {
  std::vector<double> cum_regret;
  std::vector<EpochRecord> epochs;
  VectorXd theta;
};

Run play(AgentKind kind, EnvConfig cfg, AgentParams params, std::uint64_t seed) {
  Environment env(cfg);
  auto agent = make_agent(kind, {cfg.d, cfg.K, cfg.h, cfg.s, cfg.T}, params, seed);
  Run run;
  double total = 0;
  while (!env.done()) {
    total += play_round(env, *agent).instant_regret;
    run.cum_regret.push_back(total);
  }
  run.epochs = agent->epochs();
  run.theta = env.theta();
  return run;
}

}  // namespace

TEST_CASE("epoch boundaries") {
  CHECK(EpochSchedule::datapoor(4, 200).boundaries() == std::vector<long>{16, 48, 112});
  CHECK(EpochSchedule::datarich(100, 2000).boundaries() == std::vector<long>{300, 700, 1500});
  const auto poor = EpochSchedule::datapoor(4, 200);
  CHECK(poor.epochs[1].start == 17);
  CHECK(poor.epochs[1].end - poor.epochs[1].start + 1 == 32);

  const auto pure = EpochSchedule::adaptive(4, 100, 100);
  for (const auto& e : pure.epochs) CHECK(!e.full_horizon);
  CHECK(pure.boundaries() == std::vector<long>{16, 48});
  const auto both = EpochSchedule::adaptive(12, 100, 2000);
  CHECK(both.boundaries() == std::vector<long>{48, 300, 700, 1500});

  CHECK(practical_L(5, 5, 100) == 12);
  CHECK(practical_L(25, 5, 100) == 25);
  CHECK(practical_L(10, 5, 1000) == 50);
  CHECK(practical_L(1, 1, 1) == 1);
}

TEST_CASE("chunks are disjoint and spaced") {
  for (long L : {1, 3, 4, 12}) {
    long prior_end = 0;
    for (int i = 1; i <= 8; ++i) {
      const auto c = chunk_selection(i, L);
      const long q = (1L << (i - 1)) * L;
      CHECK(c.length() == q);
      CHECK(c.quarter4_end - c.quarter4_begin + 1 == q);
      CHECK(c.quarter2_begin > prior_end);
      CHECK(c.quarter4_begin - c.quarter2_end - 1 >= q);
      CHECK(c.quarter4_end == 4 * ((1L << i) - 1) * L);
      prior_end = c.quarter4_end;
    }
  }
  CHECK_THROWS_AS(chunk_selection(0, 4), std::invalid_argument);
}

TEST_CASE("difference system") {
  const long d = 2, h = 8, L = 2;
  const MatrixXd ctx = uniform_matrix(d, 12, 1);
  const VectorXd r = uniform_matrix(12, 1, 2);
  const History hist = history_from(ctx, r);
  const auto chunks = chunk_selection(1, L);
  const auto sys = build_difference_system(hist, chunks, std::min(chunks.length(), h));
  const auto late = rounds(chunks.quarter4_begin, chunks.quarter4_end);
  const auto early = rounds(chunks.quarter2_begin, chunks.quarter2_end);
  const MatrixXd expect =
      oracle::dense_design(ctx, late, chunks.length()) - oracle::dense_design(ctx, early, chunks.length());
  CHECK(sys.barP.rows() == L);
  CHECK(sys.barP.cols() == L * d);
  CHECK((sys.barP - expect).norm() < 1e-12);
  CHECK(sys.barr(0) == r(late[0] - 1) - r(early[0] - 1));

  const History flat = history_from(ctx, VectorXd::Constant(12, 0.7));
  CHECK(build_difference_system(flat, chunks, 2).barr.isZero());

  for (int i = 1; i <= 3; ++i) {
    const auto c = chunk_selection(i, 3);
    const History big = history_from(uniform_matrix(2, c.quarter4_end, 3), VectorXd::Zero(c.quarter4_end));
    CHECK(build_difference_system(big, c, c.length()).barP.rows() == c.length());
  }
  CHECK_THROWS_AS(build_difference_system(hist, chunk_selection(2, L), 4), std::out_of_range);
}

TEST_CASE("greedy action") {
  MatrixXd x(2, 2);
  x << 0.9, 0.1, 0, 0;
  VectorXd th(2);
  th << 1, 0;
  KeyedRng rng(0);
  CHECK(greedy_action(x, th, rng) == 0);

  // Zero estimate: every arm ties; chi-square against uniform.
  const long K = 5, n = 10000;
  const MatrixXd ctx = uniform_matrix(3, K, 4);
  std::vector<long> counts(K, 0);
  for (long i = 0; i < n; ++i) {
    KeyedRng r(9, Stream::ties, static_cast<std::uint64_t>(i));
    ++counts[static_cast<std::size_t>(greedy_action(ctx, VectorXd::Zero(3), r))];
  }
  double chi2 = 0;
  for (long c : counts) {
    CHECK(std::abs(static_cast<double>(c) / n - 1.0 / K) < 0.02);
    chi2 += std::pow(c - n / K, 2) / (n / K);
  }
  CHECK(chi2 < 18.47);  // 0.999 quantile, 4 degrees of freedom

  const VectorXd t = uniform_matrix(3, 1, 5);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const MatrixXd c = uniform_matrix(3, K, 100 + s);
    KeyedRng a(s), b(s);
    CHECK(greedy_action(c, t, a) == greedy_action(c, 7.5 * t, b));
  }
}

TEST_CASE("match pursuit lag location") {
  SUBCASE("planted delay") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const long d = 3, h = 10, tau = 4;
      const MatrixXd ctx = uniform_matrix(d, 220, seed);
      const VectorXd theta = uniform_matrix(d, 1, seed + 50).normalized();
      VectorXd r = VectorXd::Zero(220);
      for (long t = tau + 1; t <= 220; ++t) r(t - 1) = ctx.col(t - 1 - tau).dot(theta);
      const History hist = history_from(ctx, r);
      const auto times = rounds(21, 220);
      hits += sw_mp_locate(hist, times, h) == tau + 1;
      const VectorXd fit = lagged_least_squares(hist, times, tau + 1);
      CHECK(sin_angle(fit, theta) <= 0.02);
    }
    CHECK(hits >= 9);
  }
  SUBCASE("reward orthogonal to every block but one") {
    const long d = 2, h = 4;
    const MatrixXd ctx = uniform_matrix(d, 60, 8);
    const auto times = rounds(11, 60);
    const MatrixXd design = oracle::dense_design(ctx, times, h);
    MatrixXd others(design.rows(), 3 * d);
    others << design.middleCols(0, d), design.middleCols(d, d), design.middleCols(3 * d, d);
    const VectorXd raw = uniform_matrix(50, 1, 9);
    const VectorXd coef = others.completeOrthogonalDecomposition().solve(raw);
    const VectorXd r_win = raw - others * coef;
    VectorXd r = VectorXd::Zero(60);
    r.tail(50) = r_win;
    CHECK(sw_mp_locate(history_from(ctx, r), times, h) == 3);
  }
  SUBCASE("all-zero window") {
    const History hist = history_from(MatrixXd::Zero(2, 10), VectorXd::Zero(10));
    const auto times = rounds(1, 10);
    CHECK_THROWS_AS(sw_mp_locate(hist, times, 3), NumericalError);
  }
}

TEST_CASE("rank-one loss") {
  const long d = 2, h = 4, n = 300;
  const MatrixXd ctx = uniform_matrix(d, n, 12);
  const auto times = rounds(h, n);
  const MatrixXd rows = oracle::dense_design(ctx, times, h);
  VectorXd theta(2), w(4);
  theta << 0.6, -0.8;
  w << 0.4, 0.3, 0.2, 0.1;
  VectorXd phi(8);
  for (long k = 0; k < h; ++k) phi.segment(k * d, d) = w(k) * theta;
  const VectorXd y = rows * phi;

  SUBCASE("gradients match finite differences") {
    const RankOneLoss loss(rows, y + 0.1 * VectorXd(uniform_matrix(y.size(), 1, 3)), d);
    const VectorXd t0 = uniform_matrix(d, 1, 4), w0 = uniform_matrix(h, 1, 5);
    const double eps = 1e-6;
    VectorXd fd_t(d), fd_w(h);
    for (long i = 0; i < d; ++i) {
      VectorXd p = t0, m = t0;
      p(i) += eps;
      m(i) -= eps;
      fd_t(i) = (loss.value(p, w0) - loss.value(m, w0)) / (2 * eps);
    }
    for (long i = 0; i < h; ++i) {
      VectorXd p = w0, m = w0;
      p(i) += eps;
      m(i) -= eps;
      fd_w(i) = (loss.value(t0, p) - loss.value(t0, m)) / (2 * eps);
    }
    CHECK((loss.grad_theta(t0, w0) - fd_t).norm() <= 1e-5 * fd_t.norm());
    CHECK((loss.grad_w(t0, w0) - fd_w).norm() <= 1e-5 * fd_w.norm());
  }
  SUBCASE("realizable data is fit and theta recovered") {
    const RankOneLoss loss(rows, y, d);
    VectorXd t0(2), w0(4);
    t0 << 0.8, -0.2;
    w0 << 0.2, 0.2, 0.2, 0.2;
    const auto res = alternating_descent(loss, t0, w0, 0.2, 1e-8, 50000, h);
    CHECK(res.loss <= 1e-6);
    CHECK(sin_angle(res.theta, theta) <= 0.05);

    // Alternating least squares on the same data lands on the same line.
    VectorXd at = t0, aw = w0;
    for (int it = 0; it < 200; ++it) {
      MatrixXd bw(rows.rows(), h), bt = MatrixXd::Zero(rows.rows(), d);
      for (long k = 0; k < h; ++k) bw.col(k) = rows.middleCols(k * d, d) * at;
      aw = bw.completeOrthogonalDecomposition().solve(y);
      for (long k = 0; k < h; ++k) bt += aw(k) * rows.middleCols(k * d, d);
      at = bt.completeOrthogonalDecomposition().solve(y);
    }
    CHECK(sin_angle(res.theta, at) <= 0.05);
  }
  SUBCASE("no data") {
    const RankOneLoss loss(MatrixXd(0, 8), VectorXd(0), d);
    const auto res = alternating_descent(loss, theta, w, 0.01, 1e-6, 100, 2);
    CHECK(res.steps == 0);
    CHECK(res.converged);
  }
  SUBCASE("hard threshold keeps the s largest weights") {
    const RankOneLoss loss(rows, y, d);
    const auto res = alternating_descent(loss, theta, w, 0.01, 1e-30, 5, 2);
    CHECK((res.w.array() != 0).count() == 2);
    CHECK(res.w(2) == 0);
    CHECK(res.w(3) == 0);
  }
}

TEST_CASE("doubling lasso recovers theta on a memoryless problem") {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EnvConfig cfg;
    cfg.d = 3;
    cfg.K = 10;
    cfg.h = 20;
    cfg.s = 1;
    cfg.T = 112;
    cfg.noise_std = 0;
    cfg.seed = seed;
    cfg.w_pattern.kind = WeightKind::single_delay;
    cfg.w_pattern.delay = 0;
    AgentParams p;
    p.L = 4;
    p.lambda_c = 1e-4;  // noiseless, so only a token penalty
    const auto run = play(AgentKind::doubling_lasso, cfg, p, seed);
    REQUIRE(run.epochs.size() == 3);
    good += sin_angle(run.epochs[2].theta_hat, run.theta) <= 0.05;
  }
  CHECK(good >= 9);
}

TEST_CASE("mass beyond the estimated lags leaves theta unknown") {
  EnvConfig cfg;
  cfg.d = 3;
  cfg.K = 10;
  cfg.h = 64;
  cfg.s = 1;
  cfg.T = 124;
  cfg.noise_std = 0;
  cfg.seed = 3;
  cfg.w_pattern.kind = WeightKind::single_delay;
  cfg.w_pattern.delay = 63;
  AgentParams p;
  p.L = 4;
  p.lambda_c = 1;  // unscaled level: out-of-window mass acts as noise and is rejected
  const auto run = play(AgentKind::doubling_lasso, cfg, p, 1);
  REQUIRE(run.epochs.size() == 3);
  for (const auto& e : run.epochs) {
    CHECK(e.support == 0);
    CHECK(e.theta_hat.isZero());
  }
  // Linear growth: the second half costs about as much as the first.
  const double half = run.cum_regret[61];
  CHECK(run.cum_regret.back() - half > 0.5 * half);
}

TEST_CASE("regularization at the bare formula zeroes the estimate and keeps theta") {
  EnvConfig cfg;
  cfg.d = 3;
  cfg.h = 20;
  cfg.s = 1;
  cfg.T = 60;
  cfg.seed = 4;
  cfg.w_pattern.kind = WeightKind::single_delay;
  cfg.w_pattern.delay = 0;
  AgentParams p;
  p.L = 4;
  const auto run = play(AgentKind::doubling_lasso, cfg, p, 2);
  for (const auto& e : run.epochs) {
    CHECK(e.support == 0);
    CHECK(e.note == "zero estimate; estimate kept");
  }
}

TEST_CASE("baselines find an exact delay") {
  for (AgentKind kind : {AgentKind::sw_mp, AgentKind::ucb_mp, AgentKind::sa_gd}) {
    EnvConfig cfg;
    cfg.d = 3;
    cfg.K = 10;
    cfg.h = 20;
    cfg.s = 1;
    cfg.T = 300;
    cfg.noise_std = 0;
    cfg.seed = 7;
    cfg.w_pattern.kind = WeightKind::single_delay;
    cfg.w_pattern.delay = 5;
    AgentParams p;
    p.L = 4;
    const auto run = play(kind, cfg, p, 3);
    REQUIRE(!run.epochs.empty());
    const auto& last = run.epochs.back();
    if (kind == AgentKind::sa_gd) {
      CHECK(run.epochs.front().located_lag == 6);
      CHECK(sin_angle(last.theta_hat, run.theta) <= 0.05);
    } else {
      CHECK(last.located_lag == 6);
    }
    if (kind == AgentKind::sw_mp) CHECK(sin_angle(last.theta_hat, run.theta) <= 0.02);
  }
}

TEST_CASE("agent runs are reproducible") {
  EnvConfig cfg;
  cfg.T = 400;
  cfg.seed = 11;
  AgentParams p;
  p.lambda_c = 0.01;
  for (AgentKind kind : {AgentKind::ad_lasso, AgentKind::sa_gd, AgentKind::sw_mp, AgentKind::ucb_mp}) {
    const auto a = play(kind, cfg, p, 5), b = play(kind, cfg, p, 5);
    CHECK(a.cum_regret == b.cum_regret);
  }
}

TEST_CASE("oracle agent has zero regret") {
  EnvConfig cfg;
  cfg.T = 200;
  cfg.seed = 2;
  Environment env(cfg);
  auto oracle_agent = make_oracle_agent(env.theta(), 1);
  double total = 0;
  while (!env.done()) total += play_round(env, *oracle_agent).instant_regret;
  CHECK(total == 0);
  CHECK_THROWS_AS(make_agent(AgentKind::oracle, {5, 10, 100, 5, 2000}, {}, 0), std::invalid_argument);
  CHECK_THROWS_AS(parse_agent_kind("thompson"), ConfigError);
}
