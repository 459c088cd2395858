#pragma once

#include "swats/numkit.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace swats {

class InvalidProblem : public std::invalid_argument {
 public:
  InvalidProblem(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)), reason_(what) {}
  const std::string& field() const { return field_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string field_;
  std::string reason_;
};

class RankDeficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Datasets

enum class Split : std::uint8_t { Train, Test };

/// Samples in rows. Targets are class indices for classifiers.
struct Dataset {
  Matrix<double> inputs;
  Vector<double> targets;
  std::vector<Split> split;

  Index size() const { return inputs.rows(); }
  Index features() const { return inputs.cols(); }

  /// Rows carrying `tag`, in their original order, all tagged `tag`.
  Dataset subset(Split tag) const;
  void validate() const;
};

/// Two Gaussian classes (unit covariance) with means at -/+ separation/2 along
/// the unit diagonal, shuffled and split 80/20 into train/test.
Dataset make_blobs(Index n_per_class, Index n_features, double class_separation,
                   std::uint64_t seed);

/// CSV with header `x0,...,x{d-1},target,split`.
void write_csv(const Dataset& data, std::ostream& out);
Dataset read_csv(std::istream& in);

// ---------------------------------------------------------------------------
// Problems

enum class MetricKind { Loss, Accuracy };

/// Differentiable training objective.
///
/// Deterministic objectives report `num_samples() == 0`; the harness then
/// takes one full-gradient step per epoch. For data-backed objectives the
/// minibatch gradient is an unbiased estimate whose average over one epoch's
/// partition equals the full gradient.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual Index dim() const = 0;
  virtual Index num_samples() const { return 0; }

  virtual double loss(const ParamVector& w) const = 0;
  virtual ParamVector gradient(const ParamVector& w) const = 0;

  virtual double batch_loss(const ParamVector& w, std::span<const Index> batch) const;
  virtual ParamVector batch_gradient(const ParamVector& w, std::span<const Index> batch) const;

  virtual ParamVector initial_point() const = 0;

  virtual MetricKind metric_kind() const { return MetricKind::Loss; }
  /// Loss on held-out data, or accuracy for classifiers. Defaults to `loss`.
  virtual double test_metric(const ParamVector& w) const { return loss(w); }
};

/// f(w) = 1/2 w^T D w, D diagonal with eigenvalues log-spaced in [1, cond].
class Quadratic final : public Problem {
 public:
  Quadratic(Index dim, double condition_number, std::uint64_t seed, double init_scale = 1.0);

  Index dim() const override { return diagonal_.size(); }
  double loss(const ParamVector& w) const override;
  ParamVector gradient(const ParamVector& w) const override;
  ParamVector initial_point() const override;

  const ParamVector& eigenvalues() const { return diagonal_; }

 private:
  ParamVector diagonal_;
  std::uint64_t seed_;
  double init_scale_;
};

/// f(w) = ||X w - y||^2 started from w = 0.
class LeastSquares final : public Problem {
 public:
  LeastSquares(Matrix<double> X, Vector<double> y);

  Index dim() const override { return X_.cols(); }
  Index num_samples() const override { return X_.rows(); }
  double loss(const ParamVector& w) const override;
  ParamVector gradient(const ParamVector& w) const override;
  /// Sum over the batch rows, rescaled by n / |batch|.
  double batch_loss(const ParamVector& w, std::span<const Index> batch) const override;
  ParamVector batch_gradient(const ParamVector& w, std::span<const Index> batch) const override;
  ParamVector initial_point() const override { return ParamVector::Zero(dim()); }

  /// X^T (X X^T)^{-1} y. Throws RankDeficient unless X has full row rank.
  ParamVector min_norm_solution() const;
  /// Norm of the component of w orthogonal to the row space of X.
  double row_space_residual(const ParamVector& w) const;

  const Matrix<double>& design() const { return X_; }
  const Vector<double>& observations() const { return y_; }

 private:
  Matrix<double> X_;
  Vector<double> y_;
  Matrix<double> row_basis_;  // orthonormal basis of the row space
  Index rank_ = 0;
};

/// Gaussian design `rows x cols` with Gaussian observations.
LeastSquares least_squares_fixture(Index rows, Index cols, std::uint64_t seed);

/// Binary logistic regression, parameters laid out as (weights..., bias).
/// Loss is mean cross-entropy plus l2/2 ||weights||^2.
class LogisticRegression final : public Problem {
 public:
  LogisticRegression(const Dataset& data, double l2);

  Index dim() const override { return train_.features() + 1; }
  Index num_samples() const override { return train_.size(); }
  double loss(const ParamVector& w) const override;
  ParamVector gradient(const ParamVector& w) const override;
  double batch_loss(const ParamVector& w, std::span<const Index> batch) const override;
  ParamVector batch_gradient(const ParamVector& w, std::span<const Index> batch) const override;
  ParamVector initial_point() const override { return ParamVector::Zero(dim()); }
  MetricKind metric_kind() const override { return MetricKind::Accuracy; }
  double test_metric(const ParamVector& w) const override;

  double accuracy(const ParamVector& w, const Dataset& data) const;

 private:
  double loss_rows(const ParamVector& w, const Matrix<double>& X, const Vector<double>& y) const;
  ParamVector grad_rows(const ParamVector& w, const Matrix<double>& X,
                        const Vector<double>& y) const;

  Dataset train_;
  Dataset test_;
  double l2_;
};

enum class Activation { Tanh, Relu };

/// Fully connected classifier with softmax cross-entropy and hand-written
/// backpropagation. `layer_widths` runs from the input width to the number of
/// classes. Each layer stores W (out x in, column-major) followed by b.
class MlpClassifier final : public Problem {
 public:
  MlpClassifier(std::vector<Index> layer_widths, Activation activation, const Dataset& data,
                std::uint64_t seed);

  Index dim() const override { return dim_; }
  Index num_samples() const override { return train_.size(); }
  double loss(const ParamVector& w) const override;
  ParamVector gradient(const ParamVector& w) const override;
  double batch_loss(const ParamVector& w, std::span<const Index> batch) const override;
  ParamVector batch_gradient(const ParamVector& w, std::span<const Index> batch) const override;
  /// Uniform in [-s, s] with s = 1/sqrt(fan_in), weights and biases alike.
  ParamVector initial_point() const override;
  MetricKind metric_kind() const override { return MetricKind::Accuracy; }
  double test_metric(const ParamVector& w) const override;

  const std::vector<Index>& layer_widths() const { return widths_; }
  double accuracy(const ParamVector& w, const Dataset& data) const;

 private:
  struct Evaluation {
    double loss = 0;
    ParamVector gradient;
  };
  Evaluation evaluate(const ParamVector& w, const Matrix<double>& X, const Vector<double>& y,
                      bool with_gradient) const;
  Matrix<double> logits(const ParamVector& w, const Matrix<double>& X) const;

  std::vector<Index> widths_;
  Activation activation_;
  Dataset train_;
  Dataset test_;
  std::uint64_t seed_;
  Index dim_ = 0;
};

// ---------------------------------------------------------------------------
// Declarative construction, as used by experiment configs.

enum class ProblemKind { Quadratic, LeastSquares, LogisticRegression, MlpClassifier };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Quadratic;
  // quadratic
  Index dim = 10;
  double condition_number = 1e3;
  double init_scale = 1.0;
  // least squares
  Index rows = 20;
  Index cols = 50;
  // blobs-backed classifiers
  Index n_per_class = 100;
  Index n_features = 2;
  double separation = 3.0;
  double l2 = 0.0;
  std::vector<Index> hidden = {8};
  Activation activation = Activation::Tanh;

  std::uint64_t seed = 0;

  void validate() const;
};

std::unique_ptr<Problem> make_problem(const ProblemSpec& spec);

std::string_view to_string(ProblemKind kind);
std::string_view to_string(Activation activation);

}  // namespace swats
