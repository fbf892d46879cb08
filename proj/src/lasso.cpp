#include <cmath>

#include "acf/error.hpp"
#include "acf/solvers.hpp"

namespace acf {

double l1_violation(double gradient, double w, double lambda) {
  if (w == 0.0) return std::max(0.0, std::abs(gradient) - lambda);
  return std::abs(gradient + (w > 0.0 ? lambda : -lambda));
}

LassoProblem::LassoProblem(const SparseDataset& data, double lambda)
    : data_(&data), lambda_(lambda), inv_l_(1.0 / static_cast<double>(data.num_examples())) {
  if (data.kind() != LabelKind::regression) throw DataError("LASSO requires regression labels");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  const std::size_t d = data.num_features();
  state_.w.assign(d, 0.0);
  state_.residual.resize(data.num_examples());
  for (std::size_t i = 0; i < data.num_examples(); ++i) state_.residual[i] = -data.labels()[i];
  state_.col_h.resize(d);
  for (std::size_t j = 0; j < d; ++j) state_.col_h[j] = data.column(j).squared_norm() * inv_l_;
}

double LassoProblem::gradient(std::size_t j, OpCounter& counter) const {
  return dot_column(state_.residual, *data_, j, counter) * inv_l_;
}

StepResult LassoProblem::step(std::size_t j, OpCounter& counter) {
  const double g = gradient(j, counter);
  if (!std::isfinite(g)) throw NumericalError("non-finite LASSO gradient");
  const double h = state_.col_h[j];
  const double w_old = state_.w[j];
  StepResult out;
  out.violation = l1_violation(g, w_old, lambda_);

  double w_new = 0.0;
  if (h > 0.0) {
    // argmin_v h/2 (v - u)^2 + lambda |v|
    const double u = w_old - g / h;
    const double shrunk = std::abs(u) - lambda_ / h;
    w_new = shrunk > 0.0 ? std::copysign(shrunk, u) : 0.0;
  }
  const double delta = w_new - w_old;
  if (delta != 0.0) {
    state_.w[j] = w_new;
    axpy_column(state_.residual, *data_, j, delta);
  }
  out.gain = -(g * delta + 0.5 * h * delta * delta + lambda_ * (std::abs(w_new) - std::abs(w_old)));
  return out;
}

double LassoProblem::violation(std::size_t j) const {
  OpCounter scratch;
  return l1_violation(gradient(j, scratch), state_.w[j], lambda_);
}

double LassoProblem::max_violation() const {
  double v = 0.0;
  for (std::size_t j = 0; j < num_coordinates(); ++j) v = std::max(v, violation(j));
  return v;
}

double LassoProblem::objective() const {
  double loss = 0.0;
  for (double r : state_.residual) loss += r * r;
  double reg = 0.0;
  for (double w : state_.w) reg += std::abs(w);
  return lambda_ * reg + 0.5 * inv_l_ * loss;
}

double LassoProblem::objective_from_scratch() const {
  OpCounter scratch;
  double loss = 0.0;
  for (std::size_t i = 0; i < data_->num_examples(); ++i) {
    const double r = dot_row(state_.w, *data_, i, scratch) - data_->labels()[i];
    loss += r * r;
  }
  double reg = 0.0;
  for (double w : state_.w) reg += std::abs(w);
  return lambda_ * reg + 0.5 * inv_l_ * loss;
}

double LassoProblem::residual_drift() const {
  OpCounter scratch;
  double drift = 0.0;
  for (std::size_t i = 0; i < data_->num_examples(); ++i) {
    const double r = dot_row(state_.w, *data_, i, scratch) - data_->labels()[i];
    drift = std::max(drift, std::abs(r - state_.residual[i]));
  }
  return drift;
}

void LassoProblem::fill(TrainResult& result) const {
  result.kind = ProblemKind::lasso;
  result.weights = state_.w;
  result.weight_vectors = 1;
  result.dual.clear();
}

}  // namespace acf
