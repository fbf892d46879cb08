#include <algorithm>
#include <cmath>

#include "acf/error.hpp"
#include "acf/solvers.hpp"
#include "dual_common.hpp"

namespace acf {

using detail::max_abs_diff;
using detail::primal_from_dual;

SvmDualProblem::SvmDualProblem(const SparseDataset& data, double c)
    : data_(&data), c_(c), y_(data.binary_signs()) {
  if (!(c > 0.0)) throw ConfigError("C must be positive");
  const std::size_t l = data.num_examples();
  state_.alpha.assign(l, 0.0);
  state_.w.assign(data.num_features(), 0.0);
  state_.q_diag.resize(l);
  for (std::size_t i = 0; i < l; ++i) state_.q_diag[i] = data.row(i).squared_norm();
}

StepResult SvmDualProblem::step(std::size_t i, OpCounter& counter) {
  const double g = y_[i] * dot_row(state_.w, *data_, i, counter) - 1.0;
  if (!std::isfinite(g)) throw NumericalError("non-finite SVM gradient");
  const double q = state_.q_diag[i];
  const double a_old = state_.alpha[i];
  StepResult out;
  out.violation = box_violation(g, a_old, 0.0, c_);

  // An empty row leaves only the linear term -a_i, minimized at the upper bound.
  const BoxStep move = box_newton_step(g, q, a_old, c_);
  const double delta = move.value - a_old;
  if (delta != 0.0) {
    state_.alpha[i] = move.value;
    axpy_row(state_.w, *data_, i, delta * y_[i]);
  }
  out.gain = move.gain;
  return out;
}

double SvmDualProblem::violation(std::size_t i) const {
  OpCounter scratch;
  const double g = y_[i] * dot_row(state_.w, *data_, i, scratch) - 1.0;
  return box_violation(g, state_.alpha[i], 0.0, c_);
}

double SvmDualProblem::max_violation() const {
  double v = 0.0;
  for (std::size_t i = 0; i < num_coordinates(); ++i) v = std::max(v, violation(i));
  return v;
}

double SvmDualProblem::objective() const {
  double wsq = 0.0;
  for (double x : state_.w) wsq += x * x;
  double sum = 0.0;
  for (double a : state_.alpha) sum += a;
  return 0.5 * wsq - sum;
}

double SvmDualProblem::objective_from_scratch() const {
  const auto w = primal_from_dual(*data_, state_.alpha, y_);
  double wsq = 0.0;
  for (double x : w) wsq += x * x;
  double sum = 0.0;
  for (double a : state_.alpha) sum += a;
  return 0.5 * wsq - sum;
}

double SvmDualProblem::weight_drift() const {
  return max_abs_diff(primal_from_dual(*data_, state_.alpha, y_), state_.w);
}

void SvmDualProblem::fill(TrainResult& result) const {
  result.kind = ProblemKind::svm;
  result.weights = state_.w;
  result.weight_vectors = 1;
  result.dual = state_.alpha;
}

}  // namespace acf
