#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "acf/random.hpp"

namespace acf::markov {

// Dense row-major square matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * n_, n_);
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// Cholesky factorization; false when a pivot falls below
// `relative_tolerance` times the largest diagonal entry.
bool cholesky_succeeds(const DenseMatrix& q, double relative_tolerance = 1e-13);

// f(w) = 1/2 w^T Q w with symmetric positive definite Q.
class QuadraticInstance {
 public:
  // Throws NumericalError if q is not symmetric (to 1e-12) or not
  // numerically positive definite.
  explicit QuadraticInstance(DenseMatrix q);

  std::size_t size() const noexcept { return q_.size(); }
  const DenseMatrix& matrix() const noexcept { return q_; }
  double value(std::span<const double> w) const;

  // Whitespace-separated dense text, one row per line.
  void write_text(std::ostream& out) const;

 private:
  DenseMatrix q_;
};

// Gram matrix of the Gaussian kernel exp(-|x_i - x_j|^2 / (2 sigma^2)) on
// the given points in the plane.
QuadraticInstance rbf_instance_from_points(std::span<const double> xs, std::span<const double> ys,
                                           double sigma);

// n standard normal points in the plane; a numerically singular draw is
// redrawn from the next derived seed, at most 10 attempts.
QuadraticInstance generate_rbf_instance(std::size_t n, double sigma, std::uint64_t seed);

// Exact 1-D Newton step on coordinate i: w_i -= (Q w)_i / Q_ii.
void cd_transition(const QuadraticInstance& instance, std::span<double> w, std::size_t i);

// Randomized coordinate descent chain on f, kept at unit norm. The
// accumulated log of the removed scale lets the unnormalized f be
// recovered.
class MarkovChain {
 public:
  MarkovChain(const QuadraticInstance& instance, std::span<const double> start);

  // Applies T_i and returns log f(before) - log f(after); +infinity when f
  // reaches zero exactly.
  double step(std::size_t i);

  std::span<const double> state() const noexcept { return w_; }
  // log f of the unnormalized iterate.
  double log_value() const;
  bool terminated() const noexcept { return terminated_; }
  // Index of the hyperplane the chain currently sits on, n before any step.
  std::size_t last_coordinate() const noexcept { return last_; }

 private:
  void refresh();

  const QuadraticInstance* instance_;
  std::vector<double> w_;
  std::vector<double> qw_;
  double f_ = 0.0;
  double log_scale_ = 0.0;
  std::size_t last_;
  // log of the factor by which cached errors grew since the last refresh
  double growth_since_refresh_ = 0.0;
  static constexpr double kRefreshGrowth = 6.9;  // about 1e3
  bool terminated_ = false;
};

// Draws i ~ pi by inversion of the cumulative distribution.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(std::span<const double> pi);
  std::size_t operator()(Rng& rng) const;

 private:
  std::vector<double> cumulative_;
};

struct RateOptions {
  // Run until stderr(rho) < rel_tol * rho.
  double rel_tol = 1e-4;
  // Steps discarded before measuring; 0 means 100 * n.
  std::uint64_t burn_in = 0;
  std::size_t batches = 100;
  std::uint64_t initial_batch_size = 1000;
  std::uint64_t max_steps = 4'000'000'000ULL;
};

struct RateEstimate {
  double rho = 0.0;
  // Mean log-drop over steps using coordinate i.
  std::vector<double> rho_i;
  std::vector<double> rho_i_stderr;
  // Mean log-drop of transitions from hyperplane i to coordinate j (n * n).
  std::vector<double> rho_ij;
  std::vector<std::uint64_t> counts;
  double stderr = 0.0;
  std::uint64_t samples = 0;
  // f reached exactly zero; no rate is defined.
  bool finite_termination = false;
  // stderr target reached before max_steps.
  bool converged = false;
  // Chain-endpoint estimate -(1/t) log(f(w_t) / f(w_0)) over measured steps.
  double endpoint_rho = 0.0;

  double max_residual() const;
};

// Simulates the stationary chain with i.i.d. coordinates from pi and
// estimates progress rates with batch-means standard errors.
RateEstimate estimate_rho(const QuadraticInstance& instance, std::span<const double> pi,
                          std::uint64_t seed, const RateOptions& options = {});

// log f after `steps` transitions of a chain started at a random unit vector.
double simulate_log_value(const QuadraticInstance& instance, std::span<const double> pi,
                          std::uint64_t steps, std::uint64_t seed);

struct BalanceOptions {
  double rel_tol = 1e-4;
  std::size_t max_iterations = 200;
  double increase = 1.2;
  double decrease = 0.5;
  double initial_step = 0.1;
  double min_step = 1e-4;
  double max_step = 0.5;
  // Equilibrium accepted when max_i |rho_i - rho| < threshold * stderr(rho).
  double threshold = 5.0;
  RateOptions rate{};
};

struct BalanceResult {
  std::vector<double> pi;
  RateEstimate estimate;
  std::size_t iterations = 0;
  bool converged = false;
  bool finite_termination = false;
  // max_i |rho_i - rho| / rho of the returned iterate.
  double relative_residual = 0.0;
};

// Rprop-style search for the distribution with equal per-coordinate rates:
// log pi_i moves by a signed step in the direction of rho_i - rho. Estimates
// start coarse and are tightened towards BalanceOptions::rel_tol.
BalanceResult balance_rprop(const QuadraticInstance& instance, std::uint64_t seed,
                            const BalanceOptions& options = {});

// pi + (2^t - 1) pi_i e_i, normalized to sum one.
std::vector<double> gamma_point(std::span<const double> pi, std::size_t i, double t);

std::vector<double> default_t_grid();

struct GammaRow {
  std::size_t i = 0;
  double t = 0.0;
  double ratio = 1.0;
  double stderr = 0.0;
};

struct GammaScan {
  RateEstimate base;
  std::vector<GammaRow> rows;
};

// rho(gamma_i(t)) / rho(pi_bar) for every coordinate and grid value; t = 0
// reuses the base estimate (ratio exactly one). Independent rng streams are
// derived per point; up to `threads` points run concurrently.
GammaScan gamma_scan(const QuadraticInstance& instance, std::span<const double> pi_bar,
                     std::span<const double> t_grid, std::uint64_t seed,
                     const RateOptions& options = {}, std::size_t threads = 1);

}  // namespace acf::markov
