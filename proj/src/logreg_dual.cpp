#include <algorithm>
#include <cmath>
#include <limits>

#include "acf/error.hpp"
#include "acf/solvers.hpp"
#include "dual_common.hpp"

namespace acf {

using detail::max_abs_diff;
using detail::primal_from_dual;

double entropy_term(double a, double complement) {
  return a * std::log(a) + complement * std::log(complement);
}

namespace {

// h(x_new) - h(x_old) for h(x) = x log x without cancellation:
// d log(x_new) + x_old log1p(d / x_old) with d = x_new - x_old.
double xlogx_difference(double x_old, double x_new) {
  const double d = x_new - x_old;
  if (d == 0.0) return 0.0;
  return d * std::log(x_new) + x_old * std::log1p(d / x_old);
}

}  // namespace

EntropyNewtonResult minimize_entropy_quadratic(double q, double b, double c, double a_start,
                                               double complement_start) {
  // phi'(a) = q a + b + log(a / (C - a)) is increasing. Work in the distance
  // z to the bound nearer to the root, which lies in (0, C/2]:
  //   psi(z) = q z + b' + log(z / (C - z)),
  // with b' = b for the lower side and b' = -(q C + b) for the upper side.
  const double half = 0.5 * c;
  const bool lower = q * half + b >= 0.0;
  const double shift = lower ? b : -(q * c + b);
  const double tol = 1e-10 * std::max(1.0, c);
  auto psi = [&](double z) { return q * z + shift + std::log(z / (c - z)); };

  double z = std::min(lower ? a_start : complement_start, half);
  if (!(z > 0.0)) z = half;
  double lo = 0.0;
  double hi = half;

  EntropyNewtonResult out;
  for (; out.iterations < kLogRegMaxNewton; ++out.iterations) {
    const double gp = psi(z);
    if (std::abs(gp) <= tol) {
      out.converged = true;
      break;
    }
    if (gp > 0.0)
      hi = z;
    else
      lo = z;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    const double gpp = q + c / (z * (c - z));
    double next = z - gp / gpp;
    if (next <= lo)
      next = lo > 0.0 ? 0.5 * (lo + hi) : 0.1 * hi;
    else if (next >= hi)
      next = 0.5 * (lo + hi);
    z = next;
  }
  out.a = lower ? z : c - z;
  out.complement = lower ? c - z : z;
  return out;
}

LogRegDualProblem::LogRegDualProblem(const SparseDataset& data, double c)
    : data_(&data), c_(c), y_(data.binary_signs()) {
  if (!(c > 0.0)) throw ConfigError("C must be positive");
  const std::size_t l = data.num_examples();
  const double a0 = std::min(0.5 * c, 0.5);
  state_.alpha.assign(l, a0);
  state_.alpha_complement.assign(l, c - a0);
  state_.q_diag.resize(l);
  state_.w.assign(data.num_features(), 0.0);
  for (std::size_t i = 0; i < l; ++i) {
    state_.q_diag[i] = data.row(i).squared_norm();
    axpy_row(state_.w, data, i, a0 * y_[i]);
  }
}

StepResult LogRegDualProblem::step(std::size_t i, OpCounter& counter) {
  const double lin = y_[i] * dot_row(state_.w, *data_, i, counter);
  if (!std::isfinite(lin)) throw NumericalError("non-finite logistic regression gradient");
  const double q = state_.q_diag[i];
  const double a_old = state_.alpha[i];
  const double comp_old = state_.alpha_complement[i];
  StepResult out;
  out.violation = std::abs(lin + std::log(a_old / comp_old));

  const auto sub = minimize_entropy_quadratic(q, lin - q * a_old, c_, a_old, comp_old);
  const double delta = sub.a - a_old;
  const double t_lin = lin * delta + 0.5 * q * delta * delta;
  const double t_a = xlogx_difference(a_old, sub.a);
  const double t_comp = xlogx_difference(comp_old, sub.complement);
  const double gain = -(t_lin + t_a + t_comp);
  // Near the optimum the terms cancel to O(delta^2) and a and C - a round
  // independently, so tiny negative gains are round-off. Moves that increase
  // the objective beyond that, or leave the open interval, become zero steps.
  const double roundoff =
      16.0 * std::numeric_limits<double>::epsilon() *
      (std::abs(t_lin) + std::abs(t_a) + std::abs(t_comp) +
       c_ * (2.0 + std::abs(std::log(sub.a)) + std::abs(std::log(sub.complement))));
  if (!std::isfinite(gain) || !(sub.a > 0.0) || !(sub.complement > 0.0) || gain < -roundoff)
    return out;
  if (delta != 0.0) {
    state_.alpha[i] = sub.a;
    state_.alpha_complement[i] = sub.complement;
    axpy_row(state_.w, *data_, i, delta * y_[i]);
  }
  out.gain = gain;
  return out;
}

double LogRegDualProblem::violation(std::size_t i) const {
  OpCounter scratch;
  const double lin = y_[i] * dot_row(state_.w, *data_, i, scratch);
  return std::abs(lin + std::log(state_.alpha[i] / state_.alpha_complement[i]));
}

double LogRegDualProblem::max_violation() const {
  double v = 0.0;
  for (std::size_t i = 0; i < num_coordinates(); ++i) v = std::max(v, violation(i));
  return v;
}

double LogRegDualProblem::objective() const {
  double wsq = 0.0;
  for (double x : state_.w) wsq += x * x;
  double ent = 0.0;
  for (std::size_t i = 0; i < state_.alpha.size(); ++i)
    ent += entropy_term(state_.alpha[i], state_.alpha_complement[i]);
  return 0.5 * wsq + ent;
}

double LogRegDualProblem::objective_from_scratch() const {
  const auto w = primal_from_dual(*data_, state_.alpha, y_);
  double wsq = 0.0;
  for (double x : w) wsq += x * x;
  double ent = 0.0;
  for (std::size_t i = 0; i < state_.alpha.size(); ++i)
    ent += entropy_term(state_.alpha[i], c_ - state_.alpha[i]);
  return 0.5 * wsq + ent;
}

double LogRegDualProblem::weight_drift() const {
  return max_abs_diff(primal_from_dual(*data_, state_.alpha, y_), state_.w);
}

void LogRegDualProblem::fill(TrainResult& result) const {
  result.kind = ProblemKind::logreg;
  result.weights = state_.w;
  result.weight_vectors = 1;
  result.dual = state_.alpha;
}

}  // namespace acf
