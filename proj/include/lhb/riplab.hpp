#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lhb/linalg.hpp"
#include "lhb/rng.hpp"

namespace lhb {

// ---------------------------------------------------------------------------
// Measurement ensembles

enum class EnsembleKind { iid, circulant_block, circulant_scalar };
// Entry distributions, all scaled to zero mean and unit variance.
enum class GeneratorDist { gaussian, rademacher, uniform };

const char* to_string(EnsembleKind kind);
const char* to_string(GeneratorDist dist);
EnsembleKind parse_ensemble_kind(const std::string& name);
GeneratorDist parse_generator_dist(const std::string& name);

// m rows acting on vectors of length d*h (or d*n blocks for circulant_block).
//
// circulant_scalar: m distinct rows of the p x p circulant of one generator,
// p = d*h. circulant_block: m distinct rows of the n x nd block circulant
// whose rows rotate by one d-block, n = h. iid: independent entries.
// All scaled by 1/sqrt(m).
struct MeasurementEnsemble {
  EnsembleKind kind = EnsembleKind::iid;
  GeneratorDist dist = GeneratorDist::gaussian;
  long rows = 0;
  long d = 1;
  long h = 1;

  long cols() const { return d * h; }
  // Largest admissible row count.
  long max_rows() const;
  MatrixXd draw(KeyedRng& rng) const;
};

// Unit-variance scalar draw.
double draw_entry(GeneratorDist dist, KeyedRng& rng);

// ---------------------------------------------------------------------------
// Rank-1 recovery

struct Rank1Recovery {
  VectorXd theta;
  VectorXd w;
  double rel_error = 0;  // ||Phi_hat - Phi*||_F / ||Phi*||_F, NaN without truth
  long iterations = 0;
  bool converged = false;
};

// Alternating least squares for y = A vec(theta w^T) (column-major vec, so
// block k of the columns multiplies w_k theta), from the top singular pair
// of mat(A^T y).
Rank1Recovery rank1_recover(const MatrixXd& a, const VectorXd& y, long d, long h,
                            const std::optional<MatrixXd>& truth = std::nullopt,
                            long max_iter = 500, double tol = 1e-9);

constexpr double kRecoveryThreshold = 1e-3;

// ---------------------------------------------------------------------------
// Phase transition

struct PhaseTransitionConfig {
  EnsembleKind kind = EnsembleKind::iid;
  GeneratorDist dist = GeneratorDist::gaussian;
  long d = 10;
  long h = 100;
  std::vector<long> s_list{1, 50, 100};
  std::vector<long> m_grid;
  long trials = 50;
  std::uint64_t seed = 0;
  long max_iter = 500;
};

struct PhaseTransitionPoint {
  long s = 0;
  long m = 0;
  double success_raw = 0;
  double success_prob = 0;  // isotonic in m
  double mean_rel_error = 0;
};

// Success fraction per (s, m). Every s shares the operator and theta of a
// given (trial, m), so differences between curves come from w alone.
std::vector<PhaseTransitionPoint> phase_transition_sweep(const PhaseTransitionConfig& cfg);

// Nondecreasing least-squares fit (pool adjacent violators), equal weights.
std::vector<double> isotonic_increasing(const std::vector<double>& y);

// Nonnegative weights, uniform on a random s-subset, unit l1 norm.
VectorXd random_sparse_weights(long h, long s, KeyedRng& rng);

// ---------------------------------------------------------------------------
// RIP constants

// Max over sampled supports of ||A_S^T A_S - I||_2; supports are `s` random
// groups of `unit` consecutive columns. A Monte-Carlo lower bound on delta_s.
double estimate_rip_constant(const MatrixXd& a, long s, long support_samples, KeyedRng& rng,
                             long unit = 1);

struct RipConstantPoint {
  long s = 0;
  long m = 0;
  double delta_mean = 0;
  double delta_max = 0;
};

struct RipConstantConfig {
  EnsembleKind kind = EnsembleKind::circulant_block;
  GeneratorDist dist = GeneratorDist::rademacher;
  long d = 5;
  long n = 100;
  std::vector<long> s_list{2, 4, 8};
  std::vector<long> m_grid;
  long trials = 5;
  long support_samples = 500;
  std::uint64_t seed = 0;
};

std::vector<RipConstantPoint> rip_constant_sweep(const RipConstantConfig& cfg);

// ---------------------------------------------------------------------------
// Circulant matrices and rank-1 Fourier vectors

using ComplexVector = Eigen::VectorXcd;

// DFT with F[k][j] = exp(-2 pi i k j / p), scaled by 1/sqrt(p).
ComplexVector unitary_dft(const ComplexVector& x);

// max_k | |d_k|^2 - 1 | with d = unitary_dft(generator).
double fourier_extremum(const ComplexVector& generator);

// ||C_bar f_k^* / sqrt(p)||^2 computed directly, where C[r][c] = g[(r - c) mod p]
// and C_bar keeps `rows` and scales by 1/sqrt(|rows|).
double circulant_fourier_energy(const ComplexVector& generator, long k,
                                const std::vector<long>& rows);

// Vector of p iid standard complex normals.
ComplexVector complex_normal_vector(long p, KeyedRng& rng);

struct Lemma1Result {
  long p = 0;
  long trials = 0;
  long violations = 0;
  double fraction = 0;
  double closed_form = 0;  // 1 - (1 - e^{-2})^p
};

// Fraction of generators with fourier_extremum > 1. p must be composite.
Lemma1Result lemma1_witness(long p, long trials, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV

void write_phase_transition_csv(std::ostream& out, const std::vector<PhaseTransitionPoint>& rows);
void write_rip_constant_csv(std::ostream& out, const std::vector<RipConstantPoint>& rows);
void write_lemma1_csv(std::ostream& out, const std::vector<Lemma1Result>& rows);

// printf "%.12g".
std::string format_number(double v);

}  // namespace lhb
