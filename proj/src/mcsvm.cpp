#include <algorithm>
#include <cmath>

#include "acf/error.hpp"
#include "acf/solvers.hpp"
#include "dual_common.hpp"

namespace acf {

McSvmProblem::McSvmProblem(const SparseDataset& data, double c, double epsilon)
    : data_(&data), c_(c), inner_tolerance_(epsilon / 10.0), dim_(data.num_features()) {
  if (data.kind() != LabelKind::classification)
    throw DataError("multi-class SVM requires class labels");
  if (data.num_classes() < 2)
    throw DataError("multi-class SVM requires at least two classes");
  if (!(c > 0.0)) throw ConfigError("C must be positive");
  const std::size_t k = data.num_classes();
  const std::size_t l = data.num_examples();
  state_.classes = k;
  state_.alpha.assign(l * k, 0.0);
  state_.w.assign(k * dim_, 0.0);
  state_.q_diag.resize(l);
  for (std::size_t i = 0; i < l; ++i) state_.q_diag[i] = data.row(i).squared_norm();
  scores_.resize(k);
  deltas_.resize(k);
}

std::span<const double> McSvmProblem::class_weights(std::size_t c) const {
  return std::span<const double>(state_.w).subspan(c * dim_, dim_);
}

std::span<double> McSvmProblem::class_weights(std::size_t c) {
  return std::span<double>(state_.w).subspan(c * dim_, dim_);
}

StepResult McSvmProblem::step(std::size_t i, OpCounter& counter) {
  const std::size_t k = state_.classes;
  const auto y = static_cast<std::size_t>(data_->classes()[i]);
  const double q = state_.q_diag[i];
  double* alpha = state_.alpha.data() + i * k;

  for (std::size_t c = 0; c < k; ++c) scores_[c] = dot_row(class_weights(c), *data_, i, counter);
  if (!std::isfinite(scores_[y])) throw NumericalError("non-finite multi-class SVM score");

  // Gradient of component c != y: <w_y - w_c, x_i> - 2. Curvature 2 q on the
  // diagonal, q between components of the same block.
  auto most_violated = [&](double& violation) {
    std::size_t best = k;
    violation = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (c == y) continue;
      const double v = box_violation(scores_[y] - scores_[c] - 2.0, alpha[c], 0.0, c_);
      if (best == k || v > violation) {
        best = c;
        violation = v;
      }
    }
    return best;
  };

  StepResult out;
  most_violated(out.violation);
  last_inner_ = 0;

  if (q == 0.0) {
    // Only the linear term remains; every component moves to the upper bound.
    for (std::size_t c = 0; c < k; ++c) {
      if (c == y) continue;
      out.gain += 2.0 * (c_ - alpha[c]);
      alpha[c] = c_;
    }
    return out;
  }

  std::fill(deltas_.begin(), deltas_.end(), 0.0);
  const std::size_t max_inner = 10 * k;
  while (last_inner_ < max_inner) {
    double v = 0.0;
    const std::size_t c = most_violated(v);
    if (c == k || v < inner_tolerance_) break;
    const double g = scores_[y] - scores_[c] - 2.0;
    const BoxStep move = box_newton_step(g, 2.0 * q, alpha[c], c_);
    const double delta = move.value - alpha[c];
    if (delta == 0.0) break;
    alpha[c] = move.value;
    out.gain += move.gain;
    deltas_[c] += delta;
    scores_[y] += delta * q;
    scores_[c] -= delta * q;
    ++last_inner_;
  }

  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (deltas_[c] == 0.0) continue;
    total += deltas_[c];
    axpy_row(class_weights(c), *data_, i, -deltas_[c]);
  }
  if (total != 0.0) axpy_row(class_weights(y), *data_, i, total);
  return out;
}

double McSvmProblem::violation(std::size_t i) const {
  const std::size_t k = state_.classes;
  const auto y = static_cast<std::size_t>(data_->classes()[i]);
  OpCounter scratch;
  std::vector<double> s(k);
  for (std::size_t c = 0; c < k; ++c) s[c] = dot_row(class_weights(c), *data_, i, scratch);
  double v = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (c == y) continue;
    v = std::max(v, box_violation(s[y] - s[c] - 2.0, state_.alpha[i * k + c], 0.0, c_));
  }
  return v;
}

double McSvmProblem::max_violation() const {
  double v = 0.0;
  for (std::size_t i = 0; i < num_coordinates(); ++i) v = std::max(v, violation(i));
  return v;
}

double McSvmProblem::objective() const {
  double wsq = 0.0;
  for (double x : state_.w) wsq += x * x;
  double sum = 0.0;
  for (double a : state_.alpha) sum += a;
  return 0.5 * wsq - 2.0 * sum;
}

namespace {

std::vector<double> weights_from_dual(const SparseDataset& data, std::span<const double> alpha,
                                      std::size_t k) {
  const std::size_t d = data.num_features();
  std::vector<double> w(k * d, 0.0);
  std::span<double> all(w);
  for (std::size_t i = 0; i < data.num_examples(); ++i) {
    const auto y = static_cast<std::size_t>(data.classes()[i]);
    for (std::size_t c = 0; c < k; ++c) {
      if (c == y) continue;
      const double a = alpha[i * k + c];
      axpy_row(all.subspan(y * d, d), data, i, a);
      axpy_row(all.subspan(c * d, d), data, i, -a);
    }
  }
  return w;
}

}  // namespace

double McSvmProblem::objective_from_scratch() const {
  const auto w = weights_from_dual(*data_, state_.alpha, state_.classes);
  double wsq = 0.0;
  for (double x : w) wsq += x * x;
  double sum = 0.0;
  for (double a : state_.alpha) sum += a;
  return 0.5 * wsq - 2.0 * sum;
}

double McSvmProblem::weight_drift() const {
  return detail::max_abs_diff(weights_from_dual(*data_, state_.alpha, state_.classes), state_.w);
}

void McSvmProblem::fill(TrainResult& result) const {
  result.kind = ProblemKind::mcsvm;
  result.weights = state_.w;
  result.weight_vectors = state_.classes;
  result.dual = state_.alpha;
}

}  // namespace acf
