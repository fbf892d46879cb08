#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "acf/scheduler.hpp"
#include "acf/sparse.hpp"

namespace acf {

enum class ProblemKind { lasso, svm, logreg, mcsvm };
enum class Selection { uniform, acf };

std::string_view to_string(ProblemKind kind);
std::string_view to_string(Selection selection);
// Throws ConfigError on unknown names.
ProblemKind parse_problem_kind(std::string_view name);
Selection parse_selection(std::string_view name);
LabelKind label_kind_for(ProblemKind kind);

struct SolverConfig {
  // lambda for the LASSO, C = 1/lambda for the dual problems.
  double regularization = 1.0;
  // KKT stopping tolerance.
  double epsilon = 0.01;
  Selection selection = Selection::acf;
  AcfConfig acf{};
  std::size_t max_epochs = 10000;
  std::uint64_t seed = 1;
  // Optional starting preferences for the ACF scheduler; uniform when empty.
  std::vector<double> initial_preferences;

  void validate() const;
};

struct StepResult {
  // Objective decrease achieved by the step.
  double gain = 0.0;
  // KKT violation of the coordinate before the step.
  double violation = 0.0;
};

struct TrainResult {
  ProblemKind kind = ProblemKind::svm;
  // Primal weights: d values, or K * d (class-major) for the multi-class SVM.
  std::vector<double> weights;
  std::size_t weight_vectors = 1;
  // Dual variables (empty for the LASSO); l * K for the multi-class SVM with
  // the entry of the true class fixed at zero.
  std::vector<double> dual;
  double objective = 0.0;
  std::size_t epochs = 0;
  std::uint64_t iterations = 0;
  std::uint64_t operations = 0;
  double seconds = 0.0;
  bool converged = false;
  // Final ACF preferences; empty for uniform selection.
  std::vector<double> preferences;
};

// Distance of the gradient from the normal cone of [lower, upper] at x
// (minimization convention).
inline double box_violation(double gradient, double x, double lower, double upper) {
  if (x <= lower) return gradient < 0.0 ? -gradient : 0.0;
  if (x >= upper) return gradient > 0.0 ? gradient : 0.0;
  return gradient < 0.0 ? -gradient : gradient;
}

// Exact minimizer of gradient * d + curvature/2 * d^2 over x + d in [0, upper]
// and its objective decrease. Zero curvature moves to the bound the gradient
// points at.
struct BoxStep {
  double value = 0.0;
  double gain = 0.0;
};
inline BoxStep box_newton_step(double gradient, double curvature, double x, double upper) {
  double target;
  if (curvature > 0.0)
    target = std::clamp(x - gradient / curvature, 0.0, upper);
  else
    target = gradient < 0.0 ? upper : (gradient > 0.0 ? 0.0 : x);
  const double d = target - x;
  return {target, -(gradient * d + 0.5 * curvature * d * d)};
}

// Distance of 0 from the subdifferential of g * w + lambda * |w| at w.
double l1_violation(double gradient, double w, double lambda);

// Latest observed KKT violation of every coordinate. Unvisited coordinates
// count as infinitely violated, so the maximum only drops below a tolerance
// once each coordinate has been checked at least once.
class KktMonitor {
 public:
  explicit KktMonitor(std::size_t n) : last_(n, std::numeric_limits<double>::infinity()) {}

  void observe(std::size_t i, double violation) { last_[i] = violation; }
  // O(n); evaluated once per epoch.
  double max() const noexcept {
    double m = 0.0;
    for (double v : last_) m = v > m ? v : m;
    return m;
  }

 private:
  std::vector<double> last_;
};

// ---------------------------------------------------------------------------
// LASSO: min_w lambda * |w|_1 + 1/(2 l) * sum_i (<w, x_i> - y_i)^2.
// Coordinates are features; the residual r = Xw - y is maintained.

struct LassoState {
  std::vector<double> w;
  std::vector<double> residual;
  // h_j = (1/l) * sum_i (x_i)_j^2
  std::vector<double> col_h;
};

class LassoProblem {
 public:
  LassoProblem(const SparseDataset& data, double lambda);

  std::size_t num_coordinates() const noexcept { return state_.w.size(); }
  StepResult step(std::size_t j, OpCounter& counter);
  double violation(std::size_t j) const;
  double max_violation() const;
  double objective() const;
  // Recomputes the residual from w before evaluating.
  double objective_from_scratch() const;
  // Max abs difference between the cached and recomputed residual.
  double residual_drift() const;

  const LassoState& state() const noexcept { return state_; }
  void fill(TrainResult& result) const;

 private:
  double gradient(std::size_t j, OpCounter& counter) const;

  const SparseDataset* data_;
  double lambda_;
  double inv_l_;
  LassoState state_;
};

// ---------------------------------------------------------------------------
// Dual linear SVM (hinge loss, no bias):
// min_a 1/2 sum_ij a_i a_j y_i y_j <x_i, x_j> - sum_i a_i, 0 <= a_i <= C.

struct SvmDualState {
  std::vector<double> alpha;
  std::vector<double> w;
  std::vector<double> q_diag;
};

class SvmDualProblem {
 public:
  SvmDualProblem(const SparseDataset& data, double c);

  std::size_t num_coordinates() const noexcept { return state_.alpha.size(); }
  StepResult step(std::size_t i, OpCounter& counter);
  double violation(std::size_t i) const;
  double max_violation() const;
  double objective() const;
  double objective_from_scratch() const;
  double weight_drift() const;

  const SvmDualState& state() const noexcept { return state_; }
  std::span<const double> signs() const noexcept { return y_; }
  void fill(TrainResult& result) const;

 private:
  const SparseDataset* data_;
  double c_;
  std::vector<double> y_;
  SvmDualState state_;
};

// ---------------------------------------------------------------------------
// Dual logistic regression:
// min_a 1/2 a^T Q a + sum_i a_i log a_i + (C - a_i) log(C - a_i),
// 0 < a_i < C. Each variable is stored together with its distance C - a_i
// so that values close to either bound keep full relative precision.

struct LogRegDualState {
  std::vector<double> alpha;
  std::vector<double> alpha_complement;
  std::vector<double> w;
  std::vector<double> q_diag;
};

// Inner solver constants.
inline constexpr double kLogRegBoundMargin = 1e-12;
inline constexpr int kLogRegMaxNewton = 50;

class LogRegDualProblem {
 public:
  LogRegDualProblem(const SparseDataset& data, double c);

  std::size_t num_coordinates() const noexcept { return state_.alpha.size(); }
  StepResult step(std::size_t i, OpCounter& counter);
  double violation(std::size_t i) const;
  double max_violation() const;
  double objective() const;
  double objective_from_scratch() const;
  double weight_drift() const;

  const LogRegDualState& state() const noexcept { return state_; }
  std::span<const double> signs() const noexcept { return y_; }
  double regularization() const noexcept { return c_; }
  void fill(TrainResult& result) const;

 private:
  const SparseDataset* data_;
  double c_;
  std::vector<double> y_;
  LogRegDualState state_;
};

// One-dimensional subproblem of the logistic regression dual
//   phi(a) = q/2 a^2 + b a + a log a + (C - a) log(C - a)
// minimized over (0, C). Returns both the minimizer and its distance to C.
struct EntropyNewtonResult {
  double a = 0.0;
  double complement = 0.0;
  int iterations = 0;
  bool converged = false;
};
EntropyNewtonResult minimize_entropy_quadratic(double q, double b, double c, double a_start,
                                               double complement_start);
double entropy_term(double a, double complement);

// ---------------------------------------------------------------------------
// Weston-Watkins multi-class SVM dual (no bias). Variables a_i^c in [0, C]
// for c != y_i; w_c = sum_{i: y_i = c} (sum_m a_i^m) x_i - sum_{i: y_i != c} a_i^c x_i;
// objective 1/2 sum_c |w_c|^2 - 2 sum_{i, c != y_i} a_i^c, which is the
// negated primal optimum of 1/2 sum_c |w_c|^2 + C sum_i sum_{c != y_i}
// max(0, 2 - <w_{y_i} - w_c, x_i>). Each example is one coordinate block.

struct McSvmState {
  // l * K, entry (i, y_i) unused and zero.
  std::vector<double> alpha;
  // K * d, class-major.
  std::vector<double> w;
  std::vector<double> q_diag;
  std::size_t classes = 0;
};

class McSvmProblem {
 public:
  McSvmProblem(const SparseDataset& data, double c, double epsilon);

  std::size_t num_coordinates() const noexcept { return state_.q_diag.size(); }
  StepResult step(std::size_t i, OpCounter& counter);
  double violation(std::size_t i) const;
  double max_violation() const;
  double objective() const;
  double objective_from_scratch() const;
  double weight_drift() const;

  std::size_t last_inner_iterations() const noexcept { return last_inner_; }
  const McSvmState& state() const noexcept { return state_; }
  void fill(TrainResult& result) const;

 private:
  std::span<const double> class_weights(std::size_t c) const;
  std::span<double> class_weights(std::size_t c);

  const SparseDataset* data_;
  double c_;
  double inner_tolerance_;
  std::size_t dim_;
  McSvmState state_;
  std::size_t last_inner_ = 0;
  // scratch buffers reused across steps
  std::vector<double> scores_;
  std::vector<double> deltas_;
};

// Runs the coordinate descent loop with the configured selection rule.
// Throws DataError when labels do not fit the problem kind and
// NumericalError on non-finite iterates.
TrainResult train(const SparseDataset& data, ProblemKind kind, const SolverConfig& config);

}  // namespace acf
