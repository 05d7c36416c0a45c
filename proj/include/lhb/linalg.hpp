#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace lhb {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

// Raised when a matrix or data set carries no usable signal (all zero, NaN, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an iterative method exhausts its budget. Carries the last iterate.
template <typename Payload>
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Payload last)
      : std::runtime_error(what), last_(std::move(last)) {}

  const Payload& last_iterate() const noexcept { return last_; }

 private:
  Payload last_;
};

// ---------------------------------------------------------------------------
// Block vectors

// A vector partitioned into consecutive blocks of equal size.
//
// Block `i` occupies entries `[i*block_size, (i+1)*block_size)`. In the
// bandit model block `i` holds `w_i * theta`, so the block index is the lag.
template <typename Scalar>
class BlockVector {
 public:
  BlockVector() = default;

  BlockVector(Vector<Scalar> data, Index block_size)
      : data_(std::move(data)), block_size_(block_size) {
    if (block_size_ <= 0 || data_.size() % block_size_ != 0) {
      throw std::invalid_argument("BlockVector: length " + std::to_string(data_.size()) +
                                  " not divisible by block size " +
                                  std::to_string(block_size_));
    }
  }

  static BlockVector Zero(Index num_blocks, Index block_size) {
    return BlockVector(Vector<Scalar>::Zero(num_blocks * block_size), block_size);
  }

  Index block_size() const noexcept { return block_size_; }
  Index num_blocks() const noexcept { return block_size_ == 0 ? 0 : data_.size() / block_size_; }
  Index size() const noexcept { return data_.size(); }

  auto block(Index i) { return data_.segment(i * block_size_, block_size_); }
  auto block(Index i) const { return data_.segment(i * block_size_, block_size_); }

  Vector<Scalar>& data() noexcept { return data_; }
  const Vector<Scalar>& data() const noexcept { return data_; }

  // Copy of the first `num_blocks` blocks, zero-padded if this vector is shorter.
  BlockVector resized(Index num_blocks) const {
    BlockVector out = Zero(num_blocks, block_size_);
    const Index keep = std::min(num_blocks, this->num_blocks()) * block_size_;
    out.data_.head(keep) = data_.head(keep);
    return out;
  }

 private:
  Vector<Scalar> data_;
  Index block_size_ = 1;
};

// Sum of per-block Euclidean norms.
template <typename Derived>
typename Derived::Scalar block_norm21(const Eigen::MatrixBase<Derived>& x, Index block_size) {
  typename Derived::Scalar acc{0};
  for (Index i = 0; i + block_size <= x.size(); i += block_size) {
    acc += x.segment(i, block_size).norm();
  }
  return acc;
}

// Largest per-block Euclidean norm.
template <typename Derived>
typename Derived::Scalar block_norm2inf(const Eigen::MatrixBase<Derived>& x, Index block_size) {
  typename Derived::Scalar acc{0};
  for (Index i = 0; i + block_size <= x.size(); i += block_size) {
    acc = std::max(acc, x.segment(i, block_size).norm());
  }
  return acc;
}

// Number of blocks whose Euclidean norm exceeds `threshold` (0 counts exact nonzeros).
template <typename Derived>
Index block_norm20(const Eigen::MatrixBase<Derived>& x, Index block_size,
                   typename Derived::Scalar threshold = 0) {
  Index count = 0;
  for (Index i = 0; i + block_size <= x.size(); i += block_size) {
    if (x.segment(i, block_size).norm() > threshold) ++count;
  }
  return count;
}

template <typename Scalar>
Scalar block_norm21(const BlockVector<Scalar>& x) {
  return block_norm21(x.data(), x.block_size());
}
template <typename Scalar>
Scalar block_norm2inf(const BlockVector<Scalar>& x) {
  return block_norm2inf(x.data(), x.block_size());
}
template <typename Scalar>
Index block_norm20(const BlockVector<Scalar>& x, Scalar threshold = 0) {
  return block_norm20(x.data(), x.block_size(), threshold);
}

// d x k matrix whose i-th column is the i-th block.
template <typename Scalar>
Matrix<Scalar> matricize(const BlockVector<Scalar>& phi) {
  return Eigen::Map<const Matrix<Scalar>>(phi.data().data(), phi.block_size(), phi.num_blocks());
}

// Inverse of matricize: stacks the columns of `m` into blocks.
template <typename Derived>
BlockVector<typename Derived::Scalar> vectorize(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> dense = m;
  return BlockVector<Scalar>(Eigen::Map<const Vector<Scalar>>(dense.data(), dense.size()),
                             dense.rows());
}

// ---------------------------------------------------------------------------
// Top singular triplet

template <typename Scalar>
struct Rank1Factorization {
  Vector<Scalar> left;   // unit, first nonzero coordinate positive
  Vector<Scalar> right;
  Scalar sigma{0};
};

namespace detail {

template <typename Scalar>
void fix_sign(Vector<Scalar>& left, Vector<Scalar>& right) {
  const Scalar eps = Scalar(64) * std::numeric_limits<Scalar>::epsilon();
  for (Index i = 0; i < left.size(); ++i) {
    if (std::abs(left(i)) > eps) {
      if (left(i) < 0) {
        left = -left;
        right = -right;
      }
      return;
    }
  }
}

// Deterministic start vector with no special alignment to coordinate axes.
template <typename Scalar>
Vector<Scalar> generic_start(Index n) {
  Vector<Scalar> v(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = Scalar(1) + Scalar(0.5) * std::sin(Scalar(1.7) * Scalar(i + 1));
  }
  return v.normalized();
}

}  // namespace detail

// Largest singular value with its left/right singular vectors.
//
// Power iteration on the rows x rows Gram matrix, which is small in every use
// here (rows = context dimension). Stops once the eigen-residual
// `||G u - lambda u||` falls below `tol * lambda`.
template <typename Derived>
Rank1Factorization<typename Derived::Scalar> top_singular_triplet(
    const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tol = 1e-10,
    Index max_iter = 1000) {
  using Scalar = typename Derived::Scalar;
  if (!(tol > 0)) throw std::invalid_argument("top_singular_triplet: tol must be positive");
  if (!m.allFinite()) throw NumericalError("non-finite input");
  if (m.size() == 0 || m.cwiseAbs().maxCoeff() == Scalar(0)) {
    throw NumericalError("degenerate matrix");
  }

  const Matrix<Scalar> gram = m * m.transpose();
  Vector<Scalar> u = detail::generic_start<Scalar>(gram.rows());
  Vector<Scalar> gu = gram * u;
  // A generic start can still be orthogonal to the range; fall back to the
  // heaviest Gram column.
  if (gu.norm() <= std::numeric_limits<Scalar>::min()) {
    Index j = 0;
    gram.diagonal().maxCoeff(&j);
    u = gram.col(j).normalized();
    gu = gram * u;
  }

  auto finish = [&](Scalar lambda) {
    Rank1Factorization<Scalar> out;
    out.sigma = std::sqrt(std::max(lambda, Scalar(0)));
    out.left = u;
    out.right = out.sigma > 0 ? Vector<Scalar>(m.transpose() * u / out.sigma)
                              : Vector<Scalar>::Zero(m.cols());
    detail::fix_sign(out.left, out.right);
    return out;
  };

  for (Index it = 0; it < max_iter; ++it) {
    const Scalar lambda = u.dot(gu);
    if ((gu - lambda * u).norm() <= tol * lambda) return finish(lambda);
    u = gu.normalized();
    gu = gram * u;
  }
  throw ConvergenceError<Rank1Factorization<Scalar>>(
      "top_singular_triplet: no convergence", finish(u.dot(gu)));
}

// ---------------------------------------------------------------------------
// Block-Toeplitz products
//
// Contexts are stored column-wise: column t-1 holds the chosen context at
// round t. The design row for round t is [xi_t, xi_{t-1}, ..., xi_{t-k+1}]
// with xi_j = 0 for j <= 0.

namespace detail {

template <typename DerivedC>
void check_times(const Eigen::MatrixBase<DerivedC>& contexts, std::span<const long> times) {
  for (long t : times) {
    if (t > contexts.cols()) {
      throw std::out_of_range("toeplitz: round " + std::to_string(t) + " beyond " +
                              std::to_string(contexts.cols()) + " recorded contexts");
    }
  }
}

}  // namespace detail

// Entry r equals sum_i <xi_{t_r - i}, phi_i> without forming the design matrix.
template <typename DerivedC, typename Scalar>
Vector<Scalar> toeplitz_matvec(const Eigen::MatrixBase<DerivedC>& contexts,
                               const BlockVector<Scalar>& phi, std::span<const long> row_times) {
  if (contexts.rows() != phi.block_size()) {
    throw std::invalid_argument("toeplitz_matvec: context dimension " +
                                std::to_string(contexts.rows()) + " != block size " +
                                std::to_string(phi.block_size()));
  }
  detail::check_times(contexts, row_times);
  const Index nb = phi.num_blocks();
  Vector<Scalar> out(static_cast<Index>(row_times.size()));
  for (Index r = 0; r < out.size(); ++r) {
    const long t = row_times[static_cast<std::size_t>(r)];
    Scalar acc{0};
    const Index lags = std::min<Index>(nb, std::max<long>(t, 0));
    for (Index i = 0; i < lags; ++i) acc += contexts.col(t - 1 - i).dot(phi.block(i));
    out(r) = acc;
  }
  return out;
}

// Adjoint of toeplitz_matvec: block i accumulates sum_r weights_r * xi_{t_r - i}.
template <typename DerivedC, typename DerivedW>
BlockVector<typename DerivedW::Scalar> toeplitz_rmatvec(const Eigen::MatrixBase<DerivedC>& contexts,
                                                        const Eigen::MatrixBase<DerivedW>& weights,
                                                        std::span<const long> row_times,
                                                        Index num_blocks) {
  using Scalar = typename DerivedW::Scalar;
  if (weights.size() != static_cast<Index>(row_times.size())) {
    throw std::invalid_argument("toeplitz_rmatvec: weight/row count mismatch");
  }
  detail::check_times(contexts, row_times);
  auto out = BlockVector<Scalar>::Zero(num_blocks, contexts.rows());
  for (Index r = 0; r < weights.size(); ++r) {
    const long t = row_times[static_cast<std::size_t>(r)];
    const Index lags = std::min<Index>(num_blocks, std::max<long>(t, 0));
    for (Index i = 0; i < lags; ++i) out.block(i) += weights(r) * contexts.col(t - 1 - i);
  }
  return out;
}

// Dense rows of the block-Toeplitz design for the given rounds, first `num_blocks` lags.
template <typename DerivedC>
Matrix<typename DerivedC::Scalar> toeplitz_rows(const Eigen::MatrixBase<DerivedC>& contexts,
                                                std::span<const long> row_times, Index num_blocks) {
  using Scalar = typename DerivedC::Scalar;
  detail::check_times(contexts, row_times);
  const Index d = contexts.rows();
  Matrix<Scalar> out = Matrix<Scalar>::Zero(static_cast<Index>(row_times.size()), num_blocks * d);
  for (Index r = 0; r < out.rows(); ++r) {
    const long t = row_times[static_cast<std::size_t>(r)];
    const Index lags = std::min<Index>(num_blocks, std::max<long>(t, 0));
    for (Index i = 0; i < lags; ++i) {
      out.row(r).segment(i * d, d) = contexts.col(t - 1 - i).transpose();
    }
  }
  return out;
}

// Sine of the angle between the lines spanned by `a` and `b`.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar sin_angle(const Eigen::MatrixBase<DerivedA>& a,
                                    const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == 0 || nb == 0) return Scalar(1);
  // Residual form keeps accuracy for nearly parallel vectors.
  const Vector<Scalar> ua = a / na;
  const Vector<Scalar> ub = b / nb;
  return std::min(Scalar(1), (ua - ua.dot(ub) * ub).norm());
}

}  // namespace lhb
