#include "lhb/riplab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lhb {

const char* to_string(EnsembleKind kind) {
  switch (kind) {
    case EnsembleKind::iid: return "iid";
    case EnsembleKind::circulant_block: return "circulant_block";
    case EnsembleKind::circulant_scalar: return "circulant_scalar";
  }
  return "?";
}

const char* to_string(GeneratorDist dist) {
  switch (dist) {
    case GeneratorDist::gaussian: return "gaussian";
    case GeneratorDist::rademacher: return "rademacher";
    case GeneratorDist::uniform: return "uniform";
  }
  return "?";
}

EnsembleKind parse_ensemble_kind(const std::string& name) {
  for (auto k : {EnsembleKind::iid, EnsembleKind::circulant_block, EnsembleKind::circulant_scalar})
    if (name == to_string(k)) return k;
  throw std::invalid_argument("unknown ensemble '" + name + "'");
}

GeneratorDist parse_generator_dist(const std::string& name) {
  for (auto g : {GeneratorDist::gaussian, GeneratorDist::rademacher, GeneratorDist::uniform})
    if (name == to_string(g)) return g;
  throw std::invalid_argument("unknown generator distribution '" + name + "'");
}

double draw_entry(GeneratorDist dist, KeyedRng& rng) {
  switch (dist) {
    case GeneratorDist::gaussian: return std::normal_distribution<double>(0.0, 1.0)(rng);
    case GeneratorDist::rademacher: return (rng() >> 63) ? 1.0 : -1.0;
    case GeneratorDist::uniform: {
      const double r = std::sqrt(3.0);
      return std::uniform_real_distribution<double>(-r, r)(rng);
    }
  }
  return 0;
}

long MeasurementEnsemble::max_rows() const {
  switch (kind) {
    case EnsembleKind::iid: return std::numeric_limits<long>::max();
    case EnsembleKind::circulant_block: return h;
    case EnsembleKind::circulant_scalar: return d * h;
  }
  return 0;
}

namespace {

std::vector<long> sample_rows(long population, long m, KeyedRng& rng) {
  std::vector<long> all(static_cast<std::size_t>(population));
  std::iota(all.begin(), all.end(), 0L);
  std::vector<long> out;
  out.reserve(static_cast<std::size_t>(m));
  std::sample(all.begin(), all.end(), std::back_inserter(out), m, rng);
  return out;
}

}  // namespace

MatrixXd MeasurementEnsemble::draw(KeyedRng& rng) const {
  if (rows < 0 || d < 1 || h < 1) throw std::invalid_argument("ensemble: bad dimensions");
  if (rows > max_rows()) {
    throw std::invalid_argument("ensemble: " + std::to_string(rows) + " rows exceed the " +
                                std::to_string(max_rows()) + " available");
  }
  const long p = cols();
  MatrixXd a(rows, p);
  switch (kind) {
    case EnsembleKind::iid:
      for (Index c = 0; c < p; ++c)
        for (Index r = 0; r < rows; ++r) a(r, c) = draw_entry(dist, rng);
      break;
    case EnsembleKind::circulant_scalar: {
      VectorXd g(p);
      for (Index i = 0; i < p; ++i) g(i) = draw_entry(dist, rng);
      const auto picked = sample_rows(p, rows, rng);
      for (Index r = 0; r < rows; ++r) {
        const long row = picked[static_cast<std::size_t>(r)];
        for (Index c = 0; c < p; ++c) a(r, c) = g(((row - c) % p + p) % p);
      }
      break;
    }
    case EnsembleKind::circulant_block: {
      MatrixXd xi(d, h);
      for (Index j = 0; j < h; ++j)
        for (Index i = 0; i < d; ++i) xi(i, j) = draw_entry(dist, rng);
      const auto picked = sample_rows(h, rows, rng);
      for (Index r = 0; r < rows; ++r) {
        const long row = picked[static_cast<std::size_t>(r)];
        for (Index b = 0; b < h; ++b) {
          a.row(r).segment(b * d, d) = xi.col(((row - b) % h + h) % h).transpose();
        }
      }
      break;
    }
  }
  if (rows > 0) a /= std::sqrt(static_cast<double>(rows));
  return a;
}

// ---------------------------------------------------------------------------

namespace {

// Solves min ||m x - y|| through the normal equations, with a tiny ridge when
// they are singular.
VectorXd normal_solve(const MatrixXd& m, const VectorXd& y) {
  MatrixXd g = MatrixXd::Zero(m.cols(), m.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
  const VectorXd rhs = m.transpose() * y;
  Eigen::LLT<MatrixXd> llt(g.selfadjointView<Eigen::Lower>());
  if (llt.info() == Eigen::Success) {
    VectorXd x = llt.solve(rhs);
    if (x.allFinite()) return x;
  }
  const double ridge = 1e-10 * std::max(1.0, g.diagonal().maxCoeff());
  g.diagonal().array() += ridge;
  return g.selfadjointView<Eigen::Lower>().ldlt().solve(rhs);
}

}  // namespace

Rank1Recovery rank1_recover(const MatrixXd& a, const VectorXd& y, long d, long h,
                            const std::optional<MatrixXd>& truth, long max_iter, double tol) {
  if (a.cols() != d * h) throw std::invalid_argument("rank1_recover: operator width != d*h");
  if (a.rows() != y.size()) throw std::invalid_argument("rank1_recover: measurement count");
  Rank1Recovery out;
  out.theta = VectorXd::Zero(d);
  out.w = VectorXd::Zero(h);

  auto rel_error = [&](const VectorXd& theta, const VectorXd& w) {
    if (!truth) return std::numeric_limits<double>::quiet_NaN();
    const double n = truth->norm();
    const MatrixXd diff = theta * w.transpose() - *truth;
    return n > 0 ? diff.norm() / n : diff.norm();
  };

  const double ynorm = y.norm();
  if (a.rows() == 0 || ynorm == 0) {
    out.rel_error = rel_error(out.theta, out.w);
    out.converged = ynorm == 0;
    return out;
  }

  const VectorXd back = a.transpose() * y;
  const MatrixXd init = Eigen::Map<const MatrixXd>(back.data(), d, h);
  Rank1Factorization<double> top;
  try {
    top = top_singular_triplet(init);
  } catch (const ConvergenceError<Rank1Factorization<double>>& e) {
    top = e.last_iterate();
  } catch (const NumericalError&) {
    out.rel_error = rel_error(out.theta, out.w);
    return out;
  }
  VectorXd theta = top.left;
  VectorXd w = top.sigma * top.right;

  MatrixXd m_theta(a.rows(), h);
  MatrixXd m_w(a.rows(), d);
  MatrixXd prev = theta * w.transpose();
  for (long it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    for (Index k = 0; k < h; ++k) m_theta.col(k).noalias() = a.middleCols(k * d, d) * theta;
    w = normal_solve(m_theta, y);
    m_w.setZero();
    for (Index k = 0; k < h; ++k)
      if (w(k) != 0) m_w.noalias() += w(k) * a.middleCols(k * d, d);
    theta = normal_solve(m_w, y);
    const double tn = theta.norm();
    if (!(tn > 0) || !std::isfinite(tn)) break;
    theta /= tn;
    w *= tn;

    const MatrixXd cur = theta * w.transpose();
    const double change = (cur - prev).norm() / std::max(cur.norm(), 1e-300);
    const double resid = (m_w * (theta * tn) - y).norm() / ynorm;
    prev = cur;
    if (resid < tol || change < tol) {
      out.converged = true;
      break;
    }
  }
  out.theta = theta;
  out.w = w;
  out.rel_error = rel_error(theta, w);
  return out;
}

// ---------------------------------------------------------------------------

VectorXd random_sparse_weights(long h, long s, KeyedRng& rng) {
  if (s < 1 || s > h) throw std::invalid_argument("random_sparse_weights: need 1 <= s <= h");
  VectorXd w = VectorXd::Zero(h);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (long pos : sample_rows(h, s, rng)) w(pos) = 1.0 - unif(rng);
  return w / w.sum();
}

std::vector<double> isotonic_increasing(const std::vector<double>& y) {
  // Blocks of (mean, count), merged while they violate monotonicity.
  std::vector<double> mean;
  std::vector<long> count;
  for (double v : y) {
    mean.push_back(v);
    count.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      const auto n = mean.size();
      const double merged = (mean[n - 2] * static_cast<double>(count[n - 2]) +
                             mean[n - 1] * static_cast<double>(count[n - 1])) /
                            static_cast<double>(count[n - 2] + count[n - 1]);
      count[n - 2] += count[n - 1];
      mean[n - 2] = merged;
      mean.pop_back();
      count.pop_back();
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t b = 0; b < mean.size(); ++b)
    out.insert(out.end(), static_cast<std::size_t>(count[b]), mean[b]);
  return out;
}

std::vector<PhaseTransitionPoint> phase_transition_sweep(const PhaseTransitionConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("phase_transition_sweep: trials must be >= 1");
  const std::size_t ns = cfg.s_list.size(), nm = cfg.m_grid.size();
  std::vector<double> hits(ns * nm, 0.0), err(ns * nm, 0.0);

  for (long trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t key = combine_keys(cfg.seed, static_cast<std::uint64_t>(trial));
    KeyedRng theta_rng(key, Stream::setup, 0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    VectorXd theta(cfg.d);
    for (auto& v : theta) v = gauss(theta_rng);
    theta.normalize();

    std::vector<MatrixXd> truths;
    for (long s : cfg.s_list) {
      KeyedRng w_rng(key, Stream::agent, static_cast<std::uint64_t>(s));
      truths.push_back(theta * random_sparse_weights(cfg.h, s, w_rng).transpose());
    }

    for (std::size_t mi = 0; mi < nm; ++mi) {
      const long m = cfg.m_grid[mi];
      if (m == 0) continue;
      MeasurementEnsemble ens{cfg.kind, cfg.dist, m, cfg.d, cfg.h};
      KeyedRng op_rng(key, Stream::contexts, static_cast<std::uint64_t>(m));
      const MatrixXd a = ens.draw(op_rng);
      for (std::size_t si = 0; si < ns; ++si) {
        const MatrixXd& truth = truths[si];
        const VectorXd y = a * Eigen::Map<const VectorXd>(truth.data(), truth.size());
        const auto rec = rank1_recover(a, y, cfg.d, cfg.h, truth, cfg.max_iter);
        hits[si * nm + mi] += rec.rel_error < kRecoveryThreshold ? 1.0 : 0.0;
        err[si * nm + mi] += std::min(rec.rel_error, 1e6);
      }
    }
  }

  std::vector<PhaseTransitionPoint> out;
  const double n = static_cast<double>(cfg.trials);
  for (std::size_t si = 0; si < ns; ++si) {
    std::vector<double> raw(nm);
    for (std::size_t mi = 0; mi < nm; ++mi) raw[mi] = hits[si * nm + mi] / n;
    const auto smooth = isotonic_increasing(raw);
    for (std::size_t mi = 0; mi < nm; ++mi) {
      PhaseTransitionPoint pt;
      pt.s = cfg.s_list[si];
      pt.m = cfg.m_grid[mi];
      pt.success_raw = raw[mi];
      pt.success_prob = smooth[mi];
      pt.mean_rel_error = pt.m == 0 ? 1.0 : err[si * nm + mi] / n;
      out.push_back(pt);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

double estimate_rip_constant(const MatrixXd& a, long s, long support_samples, KeyedRng& rng,
                             long unit) {
  if (unit < 1 || a.cols() % unit != 0) throw std::invalid_argument("rip: bad unit size");
  const long groups = a.cols() / unit;
  if (s < 1 || s > groups) throw std::invalid_argument("rip: sparsity exceeds column groups");
  double delta = 0;
  MatrixXd sub(a.rows(), s * unit);
  for (long k = 0; k < support_samples; ++k) {
    const auto support = sample_rows(groups, s, rng);
    for (long j = 0; j < s; ++j)
      sub.middleCols(j * unit, unit) = a.middleCols(support[static_cast<std::size_t>(j)] * unit, unit);
    MatrixXd g = sub.transpose() * sub;
    g.diagonal().array() -= 1.0;
    // Power iteration; ||G v|| tracks the largest eigenvalue magnitude.
    VectorXd v = detail::generic_start<double>(g.rows());
    double est = 0;
    for (int it = 0; it < 500; ++it) {
      VectorXd gv = g * v;
      const double n = gv.norm();
      if (n == 0) break;
      const double prev = est;
      est = n;
      v = gv / n;
      if (std::abs(est - prev) <= 1e-10 * est) break;
    }
    delta = std::max(delta, est);
  }
  return delta;
}

std::vector<RipConstantPoint> rip_constant_sweep(const RipConstantConfig& cfg) {
  std::vector<RipConstantPoint> out;
  for (long s : cfg.s_list) {
    for (long m : cfg.m_grid) {
      RipConstantPoint pt{s, m, 0, 0};
      for (long trial = 0; trial < cfg.trials; ++trial) {
        const std::uint64_t key = combine_keys(cfg.seed, static_cast<std::uint64_t>(trial));
        KeyedRng op_rng(key, Stream::contexts, static_cast<std::uint64_t>(m));
        const MatrixXd a = MeasurementEnsemble{cfg.kind, cfg.dist, m, cfg.d, cfg.n}.draw(op_rng);
        KeyedRng support_rng(key, Stream::agent, static_cast<std::uint64_t>(s));
        const double delta = estimate_rip_constant(a, s, cfg.support_samples, support_rng);
        pt.delta_mean += delta / static_cast<double>(cfg.trials);
        pt.delta_max = std::max(pt.delta_max, delta);
      }
      out.push_back(pt);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ComplexVector unitary_dft(const ComplexVector& x) {
  const long p = x.size();
  std::vector<std::complex<double>> twiddle(static_cast<std::size_t>(p));
  for (long j = 0; j < p; ++j) {
    const double ang = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(p);
    twiddle[static_cast<std::size_t>(j)] = {std::cos(ang), std::sin(ang)};
  }
  ComplexVector out(p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p));
  for (long k = 0; k < p; ++k) {
    std::complex<double> acc = 0;
    for (long j = 0; j < p; ++j) acc += x(j) * twiddle[static_cast<std::size_t>((k * j) % p)];
    out(k) = acc * scale;
  }
  return out;
}

double fourier_extremum(const ComplexVector& generator) {
  const ComplexVector f = unitary_dft(generator);
  double m = 0;
  for (Index k = 0; k < f.size(); ++k) m = std::max(m, std::abs(std::norm(f(k)) - 1.0));
  return m;
}

double circulant_fourier_energy(const ComplexVector& generator, long k,
                                const std::vector<long>& rows) {
  const long p = generator.size();
  if (rows.empty()) throw std::invalid_argument("circulant_fourier_energy: no rows");
  // v = conj(f_k) / sqrt(p), f_k[c] = exp(-2 pi i k c / p)
  ComplexVector v(p);
  for (long c = 0; c < p; ++c) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>((k * c) % p) /
                       static_cast<double>(p);
    v(c) = std::complex<double>(std::cos(ang), std::sin(ang)) / std::sqrt(static_cast<double>(p));
  }
  double energy = 0;
  for (long r : rows) {
    std::complex<double> acc = 0;
    for (long c = 0; c < p; ++c) acc += generator(((r - c) % p + p) % p) * v(c);
    energy += std::norm(acc);
  }
  return energy / static_cast<double>(rows.size());
}

ComplexVector complex_normal_vector(long p, KeyedRng& rng) {
  std::normal_distribution<double> half(0.0, std::sqrt(0.5));
  ComplexVector x(p);
  for (long j = 0; j < p; ++j) {
    const double re = half(rng);
    x(j) = {re, half(rng)};
  }
  return x;
}

Lemma1Result lemma1_witness(long p, long trials, std::uint64_t seed) {
  bool composite = false;
  for (long f = 2; f * f <= p; ++f) composite = composite || p % f == 0;
  if (p < 4 || !composite) {
    throw std::invalid_argument("lemma1_witness: p = " + std::to_string(p) +
                                " must be a product of two factors >= 2");
  }
  if (trials < 1) throw std::invalid_argument("lemma1_witness: trials must be >= 1");
  Lemma1Result res;
  res.p = p;
  res.trials = trials;
  for (long t = 0; t < trials; ++t) {
    KeyedRng rng(seed, Stream::trial, static_cast<std::uint64_t>(t));
    if (fourier_extremum(complex_normal_vector(p, rng)) > 1.0) ++res.violations;
  }
  res.fraction = static_cast<double>(res.violations) / static_cast<double>(trials);
  res.closed_form = 1.0 - std::pow(1.0 - std::exp(-2.0), static_cast<double>(p));
  return res;
}

// ---------------------------------------------------------------------------

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_phase_transition_csv(std::ostream& out, const std::vector<PhaseTransitionPoint>& rows) {
  out << "s,m,success_prob,success_raw,mean_rel_error\n";
  for (const auto& r : rows) {
    out << r.s << ',' << r.m << ',' << format_number(r.success_prob) << ','
        << format_number(r.success_raw) << ',' << format_number(r.mean_rel_error) << '\n';
  }
}

void write_rip_constant_csv(std::ostream& out, const std::vector<RipConstantPoint>& rows) {
  out << "s,m,delta_estimate,delta_max\n";
  for (const auto& r : rows) {
    out << r.s << ',' << r.m << ',' << format_number(r.delta_mean) << ','
        << format_number(r.delta_max) << '\n';
  }
}

void write_lemma1_csv(std::ostream& out, const std::vector<Lemma1Result>& rows) {
  out << "p,trials,violations,fraction,closed_form\n";
  for (const auto& r : rows) {
    out << r.p << ',' << r.trials << ',' << r.violations << ',' << format_number(r.fraction)
        << ',' << format_number(r.closed_form) << '\n';
  }
}

}  // namespace lhb
