#include "swats/problems.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace swats {

namespace {

std::vector<Index> to_rows(std::span<const Index> batch) {
  return std::vector<Index>(batch.begin(), batch.end());
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

void Dataset::validate() const {
  if (targets.size() != inputs.rows())
    throw InvalidProblem("targets", "row count differs from inputs");
  if (static_cast<Index>(split.size()) != inputs.rows())
    throw InvalidProblem("split", "row count differs from inputs");
}

Dataset Dataset::subset(Split tag) const {
  validate();
  std::vector<Index> rows;
  for (Index i = 0; i < size(); ++i)
    if (split[static_cast<std::size_t>(i)] == tag) rows.push_back(i);
  Dataset out;
  out.inputs = inputs(rows, Eigen::all);
  out.targets = targets(rows);
  out.split.assign(rows.size(), tag);
  return out;
}

Dataset make_blobs(Index n_per_class, Index n_features, double class_separation,
                   std::uint64_t seed) {
  if (n_per_class < 1) throw InvalidProblem("n_per_class", "must be positive");
  if (n_features < 1) throw InvalidProblem("n_features", "must be positive");
  if (!(class_separation >= 0)) throw InvalidProblem("separation", "must be nonnegative");

  const Index total = 2 * n_per_class;
  const Vector<double> direction =
      Vector<double>::Ones(n_features) / std::sqrt(static_cast<double>(n_features));

  Matrix<double> X(total, n_features);
  Vector<double> y(total);
  RngStream draw(seed, streams::kData);
  for (Index i = 0; i < total; ++i) {
    const int label = i < n_per_class ? 0 : 1;
    const double offset = (label == 0 ? -0.5 : 0.5) * class_separation;
    for (Index j = 0; j < n_features; ++j) X(i, j) = draw.normal() + offset * direction(j);
    y(i) = label;
  }

  std::vector<Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Index{0});
  RngStream(seed, streams::kSplit).shuffle(std::span<Index>(order));

  Dataset data;
  data.inputs = X(order, Eigen::all);
  data.targets = y(order);
  const Index n_train = (total * 4) / 5;
  data.split.resize(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i)
    data.split[static_cast<std::size_t>(i)] = i < n_train ? Split::Train : Split::Test;
  return data;
}

void write_csv(const Dataset& data, std::ostream& out) {
  data.validate();
  for (Index j = 0; j < data.features(); ++j) out << 'x' << j << ',';
  out << "target,split\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.features(); ++j) out << data.inputs(i, j) << ',';
    out << data.targets(i) << ','
        << (data.split[static_cast<std::size_t>(i)] == Split::Train ? "train" : "test") << '\n';
  }
}

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidProblem("csv", "missing header");
  const auto columns = std::count(line.begin(), line.end(), ',') + 1;
  if (columns < 3) throw InvalidProblem("csv", "expected feature, target and split columns");
  const Index features = columns - 2;

  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::vector<Split> split;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream cells(line);
    std::string cell;
    std::vector<double> row;
    for (Index j = 0; j < features; ++j) {
      if (!std::getline(cells, cell, ',')) throw InvalidProblem("csv", "short row: " + line);
      row.push_back(std::stod(cell));
    }
    if (!std::getline(cells, cell, ',')) throw InvalidProblem("csv", "missing target: " + line);
    targets.push_back(std::stod(cell));
    if (!std::getline(cells, cell, ',')) throw InvalidProblem("csv", "missing split: " + line);
    if (cell == "train")
      split.push_back(Split::Train);
    else if (cell == "test")
      split.push_back(Split::Test);
    else
      throw InvalidProblem("csv", "unknown split tag '" + cell + "'");
    rows.push_back(std::move(row));
  }

  Dataset data;
  data.inputs.resize(static_cast<Index>(rows.size()), features);
  data.targets.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Index j = 0; j < features; ++j)
      data.inputs(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    data.targets(static_cast<Index>(i)) = targets[i];
  }
  data.split = std::move(split);
  return data;
}

// ---------------------------------------------------------------------------
// Problem defaults

double Problem::batch_loss(const ParamVector& w, std::span<const Index>) const { return loss(w); }

ParamVector Problem::batch_gradient(const ParamVector& w, std::span<const Index>) const {
  return gradient(w);
}

// ---------------------------------------------------------------------------
// Quadratic

Quadratic::Quadratic(Index dim, double condition_number, std::uint64_t seed, double init_scale)
    : seed_(seed), init_scale_(init_scale) {
  if (dim < 1) throw InvalidProblem("dim", "must be positive");
  if (!(condition_number >= 1)) throw InvalidProblem("condition_number", "must be >= 1");
  diagonal_.resize(dim);
  for (Index i = 0; i < dim; ++i) {
    const double t = dim == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(dim - 1);
    diagonal_(i) = std::pow(condition_number, t);
  }
}

double Quadratic::loss(const ParamVector& w) const {
  require_same_size("Quadratic::loss", w, diagonal_);
  return 0.5 * w.dot(diagonal_.cwiseProduct(w));
}

ParamVector Quadratic::gradient(const ParamVector& w) const {
  require_same_size("Quadratic::gradient", w, diagonal_);
  return diagonal_.cwiseProduct(w);
}

ParamVector Quadratic::initial_point() const {
  RngStream draw(seed_, streams::kInit);
  ParamVector w(dim());
  for (Index i = 0; i < dim(); ++i) w(i) = init_scale_ * draw.normal();
  return w;
}

// ---------------------------------------------------------------------------
// Least squares

LeastSquares::LeastSquares(Matrix<double> X, Vector<double> y) : X_(std::move(X)), y_(std::move(y)) {
  if (X_.rows() < 1 || X_.cols() < 1) throw InvalidProblem("X", "must be non-empty");
  if (y_.size() != X_.rows()) throw DimensionMismatch("LeastSquares", X_.rows(), y_.size());
  const Eigen::ColPivHouseholderQR<Matrix<double>> qr(X_.transpose());
  rank_ = qr.rank();
  row_basis_ = Matrix<double>(qr.householderQ()).leftCols(rank_);
}

double LeastSquares::loss(const ParamVector& w) const {
  require_same_size("LeastSquares::loss", w, ParamVector(X_.cols()));
  return (X_ * w - y_).squaredNorm();
}

ParamVector LeastSquares::gradient(const ParamVector& w) const {
  require_same_size("LeastSquares::gradient", w, ParamVector(X_.cols()));
  return 2.0 * X_.transpose() * (X_ * w - y_);
}

double LeastSquares::batch_loss(const ParamVector& w, std::span<const Index> batch) const {
  const auto rows = to_rows(batch);
  const double scale = static_cast<double>(X_.rows()) / static_cast<double>(rows.size());
  return scale * (X_(rows, Eigen::all) * w - y_(rows)).squaredNorm();
}

ParamVector LeastSquares::batch_gradient(const ParamVector& w, std::span<const Index> batch) const {
  const auto rows = to_rows(batch);
  const double scale = static_cast<double>(X_.rows()) / static_cast<double>(rows.size());
  const Matrix<double> Xb = X_(rows, Eigen::all);
  return (2.0 * scale) * (Xb.transpose() * (Xb * w - y_(rows)));
}

ParamVector LeastSquares::min_norm_solution() const {
  if (rank_ < X_.rows())
    throw RankDeficient("min_norm_solution: X has rank " + std::to_string(rank_) + " < " +
                        std::to_string(X_.rows()) + " rows");
  return Eigen::CompleteOrthogonalDecomposition<Matrix<double>>(X_).solve(y_);
}

double LeastSquares::row_space_residual(const ParamVector& w) const {
  require_same_size("row_space_residual", w, ParamVector(X_.cols()));
  return (w - row_basis_ * (row_basis_.transpose() * w)).norm();
}

LeastSquares least_squares_fixture(Index rows, Index cols, std::uint64_t seed) {
  if (rows < 1) throw InvalidProblem("rows", "must be positive");
  if (cols < 1) throw InvalidProblem("cols", "must be positive");
  RngStream draw(seed, streams::kData);
  Matrix<double> X(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) X(i, j) = draw.normal();
  Vector<double> y(rows);
  for (Index i = 0; i < rows; ++i) y(i) = draw.normal();
  return LeastSquares(std::move(X), std::move(y));
}

// ---------------------------------------------------------------------------
// Logistic regression

LogisticRegression::LogisticRegression(const Dataset& data, double l2) : l2_(l2) {
  data.validate();
  if (!(l2 >= 0)) throw InvalidProblem("l2", "must be nonnegative");
  for (Index i = 0; i < data.size(); ++i)
    if (data.targets(i) != 0.0 && data.targets(i) != 1.0)
      throw InvalidProblem("targets", "logistic regression needs binary targets in {0, 1}");
  train_ = data.subset(Split::Train);
  test_ = data.subset(Split::Test);
  if (train_.size() == 0) throw InvalidProblem("split", "no training samples");
}

double LogisticRegression::loss_rows(const ParamVector& w, const Matrix<double>& X,
                                     const Vector<double>& y) const {
  require_same_size("LogisticRegression::loss", w, ParamVector(dim()));
  const Index d = X.cols();
  const Vector<double> z = (X * w.head(d)).array() + w(d);
  double total = 0;
  for (Index i = 0; i < z.size(); ++i) total += softplus(z(i)) - y(i) * z(i);
  return total / static_cast<double>(z.size()) + 0.5 * l2_ * w.head(d).squaredNorm();
}

ParamVector LogisticRegression::grad_rows(const ParamVector& w, const Matrix<double>& X,
                                          const Vector<double>& y) const {
  require_same_size("LogisticRegression::gradient", w, ParamVector(dim()));
  const Index d = X.cols();
  const double n = static_cast<double>(X.rows());
  const Vector<double> z = (X * w.head(d)).array() + w(d);
  const Vector<double> residual = z.unaryExpr(&sigmoid) - y;
  ParamVector g(dim());
  g.head(d) = X.transpose() * residual / n + l2_ * w.head(d);
  g(d) = residual.sum() / n;
  return g;
}

double LogisticRegression::loss(const ParamVector& w) const {
  return loss_rows(w, train_.inputs, train_.targets);
}

ParamVector LogisticRegression::gradient(const ParamVector& w) const {
  return grad_rows(w, train_.inputs, train_.targets);
}

double LogisticRegression::batch_loss(const ParamVector& w, std::span<const Index> batch) const {
  const auto rows = to_rows(batch);
  return loss_rows(w, train_.inputs(rows, Eigen::all), train_.targets(rows));
}

ParamVector LogisticRegression::batch_gradient(const ParamVector& w,
                                               std::span<const Index> batch) const {
  const auto rows = to_rows(batch);
  return grad_rows(w, train_.inputs(rows, Eigen::all), train_.targets(rows));
}

double LogisticRegression::accuracy(const ParamVector& w, const Dataset& data) const {
  if (data.size() == 0) return 0.0;
  const Index d = data.features();
  const Vector<double> z = (data.inputs * w.head(d)).array() + w(d);
  Index correct = 0;
  for (Index i = 0; i < z.size(); ++i) correct += ((z(i) > 0) == (data.targets(i) == 1.0));
  return static_cast<double>(correct) / static_cast<double>(z.size());
}

double LogisticRegression::test_metric(const ParamVector& w) const { return accuracy(w, test_); }

// ---------------------------------------------------------------------------
// MLP

MlpClassifier::MlpClassifier(std::vector<Index> layer_widths, Activation activation,
                             const Dataset& data, std::uint64_t seed)
    : widths_(std::move(layer_widths)), activation_(activation), seed_(seed) {
  data.validate();
  if (widths_.size() < 3) throw InvalidProblem("layer_widths", "need at least one hidden layer");
  for (Index width : widths_)
    if (width < 1) throw InvalidProblem("layer_widths", "widths must be positive");
  if (data.features() != widths_.front())
    throw InvalidProblem("layer_widths", "input width " + std::to_string(widths_.front()) +
                                             " does not match " + std::to_string(data.features()) +
                                             " dataset features");
  const Index classes = widths_.back();
  for (Index i = 0; i < data.size(); ++i) {
    const double t = data.targets(i);
    if (t != std::floor(t) || t < 0 || t >= static_cast<double>(classes))
      throw InvalidProblem("targets", "class index out of range");
  }
  for (std::size_t l = 1; l < widths_.size(); ++l)
    dim_ += widths_[l] * widths_[l - 1] + widths_[l];
  train_ = data.subset(Split::Train);
  test_ = data.subset(Split::Test);
  if (train_.size() == 0) throw InvalidProblem("split", "no training samples");
}

ParamVector MlpClassifier::initial_point() const {
  RngStream draw(seed_, streams::kInit);
  ParamVector w(dim_);
  Index offset = 0;
  for (std::size_t l = 1; l < widths_.size(); ++l) {
    const double s = 1.0 / std::sqrt(static_cast<double>(widths_[l - 1]));
    const Index count = widths_[l] * widths_[l - 1] + widths_[l];
    for (Index i = 0; i < count; ++i) w(offset + i) = draw.uniform(-s, s);
    offset += count;
  }
  return w;
}

Matrix<double> MlpClassifier::logits(const ParamVector& w, const Matrix<double>& X) const {
  require_same_size("MlpClassifier", w, ParamVector(dim_));
  Matrix<double> act = X;
  Index offset = 0;
  const std::size_t layers = widths_.size() - 1;
  for (std::size_t l = 1; l <= layers; ++l) {
    const Index in = widths_[l - 1];
    const Index out = widths_[l];
    const Eigen::Map<const Matrix<double>> W(w.data() + offset, out, in);
    const Eigen::Map<const Vector<double>> b(w.data() + offset + out * in, out);
    offset += out * in + out;
    Matrix<double> z = (act * W.transpose()).rowwise() + b.transpose();
    if (l < layers)
      act = activation_ == Activation::Tanh ? Matrix<double>(z.array().tanh())
                                            : Matrix<double>(z.cwiseMax(0.0));
    else
      act = std::move(z);
  }
  return act;
}

MlpClassifier::Evaluation MlpClassifier::evaluate(const ParamVector& w, const Matrix<double>& X,
                                                  const Vector<double>& y,
                                                  bool with_gradient) const {
  require_same_size("MlpClassifier", w, ParamVector(dim_));
  const std::size_t layers = widths_.size() - 1;
  const Index n = X.rows();

  // Forward pass, keeping pre-activations and activations for backprop.
  std::vector<Matrix<double>> pre(layers + 1);
  std::vector<Matrix<double>> act(layers + 1);
  std::vector<Index> offsets(layers + 1, 0);
  act[0] = X;
  Index offset = 0;
  for (std::size_t l = 1; l <= layers; ++l) {
    const Index in = widths_[l - 1];
    const Index out = widths_[l];
    offsets[l] = offset;
    const Eigen::Map<const Matrix<double>> W(w.data() + offset, out, in);
    const Eigen::Map<const Vector<double>> b(w.data() + offset + out * in, out);
    offset += out * in + out;
    pre[l] = (act[l - 1] * W.transpose()).rowwise() + b.transpose();
    if (l < layers)
      act[l] = activation_ == Activation::Tanh ? Matrix<double>(pre[l].array().tanh())
                                               : Matrix<double>(pre[l].cwiseMax(0.0));
  }

  // Softmax cross-entropy, row by row with the max subtracted.
  const Matrix<double>& z = pre[layers];
  Matrix<double> probs(n, z.cols());
  double total = 0;
  for (Index i = 0; i < n; ++i) {
    const double peak = z.row(i).maxCoeff();
    const auto shifted = (z.row(i).array() - peak).exp();
    const double norm = shifted.sum();
    probs.row(i) = shifted / norm;
    const auto label = static_cast<Index>(y(i));
    total += std::log(norm) + peak - z(i, label);
  }

  Evaluation result;
  result.loss = total / static_cast<double>(n);
  if (!with_gradient) return result;

  result.gradient.resize(dim_);
  Matrix<double> delta = probs;
  for (Index i = 0; i < n; ++i) delta(i, static_cast<Index>(y(i))) -= 1.0;
  delta /= static_cast<double>(n);

  for (std::size_t l = layers; l >= 1; --l) {
    const Index in = widths_[l - 1];
    const Index out = widths_[l];
    Eigen::Map<Matrix<double>> dW(result.gradient.data() + offsets[l], out, in);
    Eigen::Map<Vector<double>> db(result.gradient.data() + offsets[l] + out * in, out);
    dW = delta.transpose() * act[l - 1];
    db = delta.colwise().sum().transpose();
    if (l == 1) break;
    const Eigen::Map<const Matrix<double>> W(w.data() + offsets[l], out, in);
    Matrix<double> upstream = delta * W;
    if (activation_ == Activation::Tanh)
      delta = upstream.array() * (1.0 - act[l - 1].array().square());
    else
      delta = upstream.array() * (pre[l - 1].array() > 0.0).cast<double>();
  }
  return result;
}

double MlpClassifier::loss(const ParamVector& w) const {
  return evaluate(w, train_.inputs, train_.targets, false).loss;
}

ParamVector MlpClassifier::gradient(const ParamVector& w) const {
  return evaluate(w, train_.inputs, train_.targets, true).gradient;
}

double MlpClassifier::batch_loss(const ParamVector& w, std::span<const Index> batch) const {
  const auto rows = to_rows(batch);
  return evaluate(w, train_.inputs(rows, Eigen::all), train_.targets(rows), false).loss;
}

ParamVector MlpClassifier::batch_gradient(const ParamVector& w,
                                          std::span<const Index> batch) const {
  const auto rows = to_rows(batch);
  return evaluate(w, train_.inputs(rows, Eigen::all), train_.targets(rows), true).gradient;
}

double MlpClassifier::accuracy(const ParamVector& w, const Dataset& data) const {
  if (data.size() == 0) return 0.0;
  const Matrix<double> z = logits(w, data.inputs);
  Index correct = 0;
  for (Index i = 0; i < z.rows(); ++i) {
    Index best = 0;
    z.row(i).maxCoeff(&best);
    correct += (static_cast<double>(best) == data.targets(i));
  }
  return static_cast<double>(correct) / static_cast<double>(z.rows());
}

double MlpClassifier::test_metric(const ParamVector& w) const { return accuracy(w, test_); }

// ---------------------------------------------------------------------------
// Specs

void ProblemSpec::validate() const {
  switch (kind) {
    case ProblemKind::Quadratic:
      if (dim < 1) throw InvalidProblem("problem.dim", "must be positive");
      if (!(condition_number >= 1))
        throw InvalidProblem("problem.condition_number", "must be >= 1");
      if (!std::isfinite(init_scale)) throw InvalidProblem("problem.init_scale", "must be finite");
      break;
    case ProblemKind::LeastSquares:
      if (rows < 1) throw InvalidProblem("problem.rows", "must be positive");
      if (cols < 1) throw InvalidProblem("problem.cols", "must be positive");
      break;
    case ProblemKind::MlpClassifier:
      if (hidden.empty()) throw InvalidProblem("problem.hidden", "need at least one hidden layer");
      for (Index width : hidden)
        if (width < 1) throw InvalidProblem("problem.hidden", "widths must be positive");
      [[fallthrough]];
    case ProblemKind::LogisticRegression:
      if (n_per_class < 1) throw InvalidProblem("problem.n_per_class", "must be positive");
      if (n_features < 1) throw InvalidProblem("problem.n_features", "must be positive");
      if (!(separation >= 0)) throw InvalidProblem("problem.separation", "must be nonnegative");
      if (!(l2 >= 0)) throw InvalidProblem("problem.l2", "must be nonnegative");
      break;
  }
}

std::unique_ptr<Problem> make_problem(const ProblemSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ProblemKind::Quadratic:
      return std::make_unique<Quadratic>(spec.dim, spec.condition_number, spec.seed,
                                         spec.init_scale);
    case ProblemKind::LeastSquares:
      return std::make_unique<LeastSquares>(least_squares_fixture(spec.rows, spec.cols, spec.seed));
    case ProblemKind::LogisticRegression:
      return std::make_unique<LogisticRegression>(
          make_blobs(spec.n_per_class, spec.n_features, spec.separation, spec.seed), spec.l2);
    case ProblemKind::MlpClassifier: {
      std::vector<Index> widths{spec.n_features};
      widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
      widths.push_back(2);
      return std::make_unique<MlpClassifier>(
          std::move(widths), spec.activation,
          make_blobs(spec.n_per_class, spec.n_features, spec.separation, spec.seed), spec.seed);
    }
  }
  throw InvalidProblem("problem.kind", "unknown kind");
}

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Quadratic:
      return "quadratic";
    case ProblemKind::LeastSquares:
      return "least_squares";
    case ProblemKind::LogisticRegression:
      return "logistic_regression";
    case ProblemKind::MlpClassifier:
      return "mlp_classifier";
  }
  return "unknown";
}

std::string_view to_string(Activation activation) {
  return activation == Activation::Tanh ? "tanh" : "relu";
}

}  // namespace swats
