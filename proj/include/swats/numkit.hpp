#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace swats {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Flat vector holding every trainable parameter of a problem.
using ParamVector = Vector<double>;
using Index = Eigen::Index;

class DimensionMismatch : public std::invalid_argument {
 public:
  DimensionMismatch(const std::string& where, Index lhs, Index rhs)
      : std::invalid_argument(where + ": dimension mismatch (" + std::to_string(lhs) +
                              " vs " + std::to_string(rhs) + ")"),
        lhs_(lhs),
        rhs_(rhs) {}

  Index lhs() const { return lhs_; }
  Index rhs() const { return rhs_; }

 private:
  Index lhs_;
  Index rhs_;
};

class NonFiniteValue : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename A, typename B>
void require_same_size(const char* where, const Eigen::MatrixBase<A>& a,
                       const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size()) throw DimensionMismatch(where, a.size(), b.size());
}

template <typename A, typename B>
typename A::Scalar dot(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  require_same_size("dot", a, b);
  return a.dot(b);
}

/// alpha * x + y
template <typename Scalar, typename A, typename B>
Vector<typename A::Scalar> axpy(Scalar alpha, const Eigen::MatrixBase<A>& x,
                                const Eigen::MatrixBase<B>& y) {
  require_same_size("axpy", x, y);
  return typename A::Scalar(alpha) * x + y;
}

// Elementwise kernels. Each returns a fresh vector; inputs are never aliased.

template <typename A, typename B>
Vector<typename A::Scalar> mul(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  require_same_size("mul", x, y);
  return x.cwiseProduct(y);
}

/// x_i / (y_i + eps)
template <typename A, typename B>
Vector<typename A::Scalar> div_eps(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y,
                                   typename A::Scalar eps) {
  require_same_size("div_eps", x, y);
  if (!(eps >= 0)) throw std::invalid_argument("div_eps: eps must be nonnegative");
  return (x.array() / (y.array() + eps)).matrix();
}

template <typename A>
Vector<typename A::Scalar> sqrt(const Eigen::MatrixBase<A>& x) {
  return x.cwiseSqrt();
}

template <typename A>
Vector<typename A::Scalar> square(const Eigen::MatrixBase<A>& x) {
  return x.cwiseAbs2();
}

/// min(max(x_i, lo), hi). Infinite bounds are allowed.
template <typename A>
Vector<typename A::Scalar> clip(const Eigen::MatrixBase<A>& x, typename A::Scalar lo,
                                typename A::Scalar hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clip: lower bound exceeds upper bound");
  return x.unaryExpr([lo, hi](typename A::Scalar v) { return std::min(std::max(v, lo), hi); });
}

template <typename A>
bool all_finite(const Eigen::MatrixBase<A>& x) {
  return x.allFinite();
}

/// Central-difference gradient of `f` at `w`, one coordinate at a time.
template <typename Scalar>
Vector<Scalar> finite_diff_grad(const std::function<Scalar(const Vector<Scalar>&)>& f,
                                const Vector<Scalar>& w, Scalar h = Scalar(1e-5)) {
  if (!(h > 0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  Vector<Scalar> grad(w.size());
  Vector<Scalar> probe = w;
  for (Index i = 0; i < w.size(); ++i) {
    probe(i) = w(i) + h;
    const Scalar up = f(probe);
    probe(i) = w(i) - h;
    const Scalar down = f(probe);
    probe(i) = w(i);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NonFiniteValue("finite_diff_grad: objective is not finite near coordinate " +
                           std::to_string(i));
    grad(i) = (up - down) / (2 * h);
  }
  return grad;
}

/// Seeded random stream.
///
/// Backed by std::mt19937_64 seeded through std::seed_seq from (seed, stream_id);
/// both are fully specified by the standard, so sequences replay identically
/// on every conforming platform. The distributions below are implemented
/// here rather than taken from <random>, whose distribution algorithms are
/// implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via the Marsaglia polar method.
  double normal();
  /// Uniform integer in [0, bound), unbiased.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Well-known stream ids so each purpose draws from its own sequence.
namespace streams {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kTest = 99;
}  // namespace streams

/// SplitMix64 finalizer, used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace swats
