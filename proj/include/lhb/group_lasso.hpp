#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "lhb/linalg.hpp"

namespace lhb {

// ---------------------------------------------------------------------------
// Design operators

template <typename Op>
concept LinearOperator = requires(const Op& op, const Vector<typename Op::Scalar>& v) {
  typename Op::Scalar;
  { op.rows() } -> std::convertible_to<Index>;
  { op.cols() } -> std::convertible_to<Index>;
  { op.apply(v) } -> std::convertible_to<Vector<typename Op::Scalar>>;
  { op.adjoint(v) } -> std::convertible_to<Vector<typename Op::Scalar>>;
  { op.all_finite() } -> std::convertible_to<bool>;
};

// Explicit matrix.
template <typename Scalar_>
class DenseOperator {
 public:
  using Scalar = Scalar_;

  DenseOperator() = default;
  explicit DenseOperator(Matrix<Scalar> a) : a_(std::move(a)) {}

  Index rows() const { return a_.rows(); }
  Index cols() const { return a_.cols(); }
  Vector<Scalar> apply(const Vector<Scalar>& x) const { return a_ * x; }
  Vector<Scalar> adjoint(const Vector<Scalar>& r) const { return a_.transpose() * r; }
  bool all_finite() const { return a_.allFinite(); }

  const Matrix<Scalar>& matrix() const { return a_; }

 private:
  Matrix<Scalar> a_;
};

// Rows of the block-Toeplitz design taken at `plus_times`, minus the rows at
// `minus_times` when given, restricted to the first `num_blocks` lags. The
// design itself is never formed. `contexts` must outlive the operator.
template <typename Scalar_>
class ToeplitzOperator {
 public:
  using Scalar = Scalar_;

  ToeplitzOperator(const Matrix<Scalar>& contexts, std::vector<long> plus_times,
                   std::vector<long> minus_times, Index num_blocks)
      : contexts_(&contexts),
        plus_(std::move(plus_times)),
        minus_(std::move(minus_times)),
        num_blocks_(num_blocks) {
    if (!minus_.empty() && minus_.size() != plus_.size()) {
      throw std::invalid_argument("ToeplitzOperator: differenced row sets differ in length");
    }
  }

  Index rows() const { return static_cast<Index>(plus_.size()); }
  Index cols() const { return num_blocks_ * contexts_->rows(); }

  Vector<Scalar> apply(const Vector<Scalar>& x) const {
    const BlockVector<Scalar> phi(x, contexts_->rows());
    Vector<Scalar> out = toeplitz_matvec(*contexts_, phi, std::span<const long>(plus_));
    if (!minus_.empty()) out -= toeplitz_matvec(*contexts_, phi, std::span<const long>(minus_));
    return out;
  }

  Vector<Scalar> adjoint(const Vector<Scalar>& r) const {
    Vector<Scalar> out =
        toeplitz_rmatvec(*contexts_, r, std::span<const long>(plus_), num_blocks_).data();
    if (!minus_.empty()) {
      out -= toeplitz_rmatvec(*contexts_, r, std::span<const long>(minus_), num_blocks_).data();
    }
    return out;
  }

  bool all_finite() const { return contexts_->allFinite(); }

  Matrix<Scalar> to_dense() const {
    Matrix<Scalar> out = toeplitz_rows(*contexts_, std::span<const long>(plus_), num_blocks_);
    if (!minus_.empty()) out -= toeplitz_rows(*contexts_, std::span<const long>(minus_), num_blocks_);
    return out;
  }

 private:
  const Matrix<Scalar>* contexts_;
  std::vector<long> plus_;
  std::vector<long> minus_;
  Index num_blocks_;
};

// ---------------------------------------------------------------------------
// Problem and solution

// minimize  scale * ||A phi - y||^2 + lambda * ||phi||_{2,1}
template <LinearOperator Op>
struct LassoProblem {
  using Scalar = typename Op::Scalar;

  Op design;
  Vector<Scalar> response;
  Scalar lambda{0};
  Index block_size{1};
  Scalar scale{1};

  Scalar objective(const Vector<Scalar>& phi) const {
    return scale * (design.apply(phi) - response).squaredNorm() +
           lambda * block_norm21(phi, block_size);
  }
};

template <typename Scalar>
struct LassoSolution {
  BlockVector<Scalar> phi_hat;
  Scalar objective{0};
  Index iterations{0};
  bool converged{false};
};

// Proximal map of tau * ||.||_{2,1}: each block shrinks by max(0, 1 - tau/||b||).
// Blocks whose norm is at most tau become exactly zero.
template <typename Scalar>
BlockVector<Scalar> block_soft_threshold(BlockVector<Scalar> v, Scalar tau) {
  if (!(tau >= 0)) throw std::invalid_argument("block_soft_threshold: tau must be nonnegative");
  for (Index i = 0; i < v.num_blocks(); ++i) {
    auto b = v.block(i);
    const Scalar n = b.norm();
    if (n <= tau) {
      b.setZero();
    } else {
      b *= Scalar(1) - tau / n;
    }
  }
  return v;
}

// Largest eigenvalue of 2 * scale * A^T A by power iteration.
template <LinearOperator Op>
typename Op::Scalar lipschitz_constant(const Op& a, typename Op::Scalar scale,
                                       Index max_iter = 500, typename Op::Scalar rtol = 1e-7) {
  using Scalar = typename Op::Scalar;
  if (a.cols() == 0 || a.rows() == 0) return Scalar(0);
  Vector<Scalar> v = detail::generic_start<Scalar>(a.cols());
  Scalar estimate{0};
  for (Index it = 0; it < max_iter; ++it) {
    Vector<Scalar> next = a.adjoint(a.apply(v));
    const Scalar n = next.norm();
    if (n == Scalar(0)) return Scalar(0);
    const Scalar prev = estimate;
    estimate = n;
    v = next / n;
    if (std::abs(estimate - prev) <= rtol * estimate) break;
  }
  return Scalar(2) * scale * estimate;
}

// Accelerated proximal gradient (FISTA) with function-value restarts.
//
// Every accepted iterate lowers the objective: when an accelerated step would
// raise it, the momentum is dropped and a plain proximal step is taken from
// the current point. Terminates when the relative objective decrease drops
// below `tol`.
template <LinearOperator Op>
LassoSolution<typename Op::Scalar> solve(const LassoProblem<Op>& problem,
                                         typename Op::Scalar tol = 1e-8, Index max_iter = 5000,
                                         const std::optional<BlockVector<typename Op::Scalar>>&
                                             warm_start = std::nullopt) {
  using Scalar = typename Op::Scalar;
  const Op& a = problem.design;
  const Index d = problem.block_size;
  if (!(tol > 0)) throw std::invalid_argument("group lasso: tol must be positive");
  if (!(problem.lambda >= 0)) throw std::invalid_argument("group lasso: lambda must be nonnegative");
  if (d <= 0 || a.cols() % d != 0) throw std::invalid_argument("group lasso: bad block size");
  if (problem.response.size() != a.rows()) {
    throw std::invalid_argument("group lasso: response length does not match design rows");
  }
  if (!a.all_finite() || !problem.response.allFinite() || !std::isfinite(problem.lambda) ||
      !std::isfinite(problem.scale)) {
    throw NumericalError("non-finite input");
  }

  const Vector<Scalar>& y = problem.response;
  const Scalar lam = problem.lambda;
  const Scalar scale = problem.scale;
  auto objective_from = [&](const Vector<Scalar>& x, const Vector<Scalar>& ax) {
    return scale * (ax - y).squaredNorm() + lam * block_norm21(x, d);
  };

  LassoSolution<Scalar> out;
  Vector<Scalar> x = Vector<Scalar>::Zero(a.cols());
  if (warm_start && warm_start->size() > 0) {
    const Index keep = std::min(warm_start->size(), x.size());
    x.head(keep) = warm_start->data().head(keep);
  }

  const Scalar lip = lipschitz_constant(a, scale);
  if (!(lip > 0)) {
    // Design is zero: the penalty alone decides and its minimizer is 0.
    x.setZero();
    out.phi_hat = BlockVector<Scalar>(x, d);
    out.objective = objective_from(x, Vector<Scalar>::Zero(a.rows()));
    out.converged = true;
    return out;
  }
  const Scalar step = Scalar(1) / (Scalar(1.01) * lip);

  Vector<Scalar> ax = a.apply(x);
  Scalar fx = objective_from(x, ax);
  Vector<Scalar> yk = x;
  Vector<Scalar> ayk = ax;
  Scalar t = 1;
  bool just_restarted = false;

  for (Index it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    const Vector<Scalar> grad = Scalar(2) * scale * a.adjoint(ayk - y);
    Vector<Scalar> z =
        block_soft_threshold(BlockVector<Scalar>(yk - step * grad, d), lam * step).data();
    Vector<Scalar> az = a.apply(z);
    const Scalar fz = objective_from(z, az);

    if (fz > fx) {
      if (just_restarted) {
        // A plain proximal step from x cannot make progress: x is optimal to
        // working precision.
        out.converged = true;
        break;
      }
      yk = x;
      ayk = ax;
      t = 1;
      just_restarted = true;
      continue;
    }
    just_restarted = false;

    const Scalar decrease = fx - fz;
    const Scalar denom = std::max(std::abs(fx), std::numeric_limits<Scalar>::min());
    const Scalar t_next = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t)) / Scalar(2);
    const Scalar beta = (t - Scalar(1)) / t_next;
    yk = z + beta * (z - x);
    ayk = az + beta * (az - ax);
    x = std::move(z);
    ax = std::move(az);
    fx = fz;
    t = t_next;

    if (decrease / denom < tol) {
      out.converged = true;
      break;
    }
  }

  out.phi_hat = BlockVector<Scalar>(x, d);
  out.objective = problem.objective(x);
  return out;
}

// ---------------------------------------------------------------------------
// Regularization schedules

// c * d * sqrt(2 log(2^i d L / gamma) / (2^{i-1} L)), used by the partial
// (first 2^{i-1} L lags) estimates of the doubling scheme.
double lambda_datapoor(int epoch, long L, long d, double gamma, double c = 1.0);

// c * 2 * sqrt(2 d log(2^j h / gamma) / (2^{j-1} h)), used once the whole
// horizon is estimated. `c` defaults to the bare formula.
double lambda_datarich(int epoch, long h, long d, double gamma, double c = 1.0);

}  // namespace lhb
