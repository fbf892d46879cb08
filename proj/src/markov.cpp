#include "acf/markov.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>

#include "acf/error.hpp"

namespace acf::markov {

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool cholesky_succeeds(const DenseMatrix& q, double relative_tolerance) {
  const std::size_t n = q.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(q(i, i)));
  if (!(scale > 0.0)) return false;
  DenseMatrix l(n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = q(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > relative_tolerance * scale)) return false;
    l(j, j) = std::sqrt(pivot);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = q(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return true;
}

QuadraticInstance::QuadraticInstance(DenseMatrix q) : q_(std::move(q)) {
  const std::size_t n = q_.size();
  if (n == 0) throw NumericalError("empty quadratic instance");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(q_(i, j) - q_(j, i)) > 1e-12 * std::max(1.0, std::abs(q_(i, j))))
        throw NumericalError("matrix is not symmetric");
  if (!cholesky_succeeds(q_)) throw NumericalError("matrix is not numerically positive definite");
}

double QuadraticInstance::value(std::span<const double> w) const {
  const std::size_t n = size();
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += q_(i, j) * w[j];
    f += w[i] * s;
  }
  return 0.5 * f;
}

void QuadraticInstance::write_text(std::ostream& out) const {
  const auto old_precision = out.precision(17);
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < size(); ++j) out << (j ? " " : "") << q_(i, j);
    out << '\n';
  }
  out.precision(old_precision);
}

QuadraticInstance rbf_instance_from_points(std::span<const double> xs, std::span<const double> ys,
                                           double sigma) {
  if (xs.size() != ys.size()) throw std::invalid_argument("coordinate arrays differ in length");
  if (!(sigma > 0.0)) throw std::invalid_argument("kernel width must be positive");
  const std::size_t n = xs.size();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  DenseMatrix q(n);
  for (std::size_t i = 0; i < n; ++i) {
    q(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      q(i, j) = q(j, i) = std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
  return QuadraticInstance(std::move(q));
}

QuadraticInstance generate_rbf_instance(std::size_t n, double sigma, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("instance dimension must be positive");
  constexpr int kAttempts = 10;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = standard_normal(rng);
      ys[i] = standard_normal(rng);
    }
    try {
      return rbf_instance_from_points(xs, ys, sigma);
    } catch (const NumericalError&) {
    }
  }
  throw NumericalError("no positive definite RBF instance after " + std::to_string(kAttempts) +
                       " draws");
}

void cd_transition(const QuadraticInstance& instance, std::span<double> w, std::size_t i) {
  const auto& q = instance.matrix();
  // w_i - (Qw)_i / Q_ii with the diagonal term cancelled analytically, so a
  // diagonal Q zeroes the coordinate exactly.
  double off = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j)
    if (j != i) off += q(i, j) * w[j];
  w[i] = -off / q(i, i);
}

// ---------------------------------------------------------------------------

MarkovChain::MarkovChain(const QuadraticInstance& instance, std::span<const double> start)
    : instance_(&instance), w_(start.begin(), start.end()), qw_(start.size()), last_(start.size()) {
  if (w_.size() != instance.size()) throw std::invalid_argument("start vector has wrong dimension");
  double norm = 0.0;
  for (double x : w_) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw std::invalid_argument("start vector must be non-zero");
  for (double& x : w_) x /= norm;
  log_scale_ = 2.0 * std::log(norm);
  refresh();
}

void MarkovChain::refresh() {
  const auto& q = instance_->matrix();
  const std::size_t n = w_.size();
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += q(i, j) * w_[j];
    // No entry is forced to zero here: the residual (Qw)_i left by rounding
    // after a projection would otherwise hide from every later refresh.
    qw_[i] = s;
    f += w_[i] * s;
  }
  f_ = 0.5 * f;
  growth_since_refresh_ = 0.0;
}

double MarkovChain::step(std::size_t i) {
  if (terminated_) return std::numeric_limits<double>::infinity();
  const auto& q = instance_->matrix();
  const std::size_t n = w_.size();
  const double g = qw_[i];
  const double qii = q(i, i);
  const double delta = -g / qii;
  const double ratio = g * g / (2.0 * qii * f_);

  w_[i] += delta;
  const auto qi = q.row(i);
  for (std::size_t j = 0; j < n; ++j) qw_[j] += delta * qi[j];
  qw_[i] = 0.0;
  double f_new = 0.0;
  for (std::size_t j = 0; j < n; ++j) f_new += w_[j] * qw_[j];
  f_new *= 0.5;
  last_ = i;

  double norm = 0.0;
  for (double x : w_) norm += x * x;
  if (!(f_new > 0.0) || !(norm > 0.0)) {
    terminated_ = true;
    return std::numeric_limits<double>::infinity();
  }

  // Small relative decrements are more accurate through log1p; large ones
  // through the directly evaluated quadratic form.
  const double drop = ratio <= 0.5 ? -std::log1p(-ratio) : std::log(f_ / f_new);

  norm = std::sqrt(norm);
  const double inv = 1.0 / norm;
  for (std::size_t j = 0; j < n; ++j) {
    w_[j] *= inv;
    qw_[j] *= inv;
  }
  f_ = f_new * inv * inv;
  log_scale_ += 2.0 * std::log(norm);

  // Rounding errors in the cached Qw are not contracted by the projections
  // but are amplified by every renormalization, so Qw is recomputed once
  // the accumulated amplification reaches kRefreshGrowth.
  if (norm < 1.0) growth_since_refresh_ -= std::log(norm);
  if (growth_since_refresh_ >= kRefreshGrowth) refresh();
  return drop;
}

double MarkovChain::log_value() const {
  if (terminated_) return -std::numeric_limits<double>::infinity();
  return std::log(f_) + log_scale_;
}

CategoricalSampler::CategoricalSampler(std::span<const double> pi) : cumulative_(pi.size()) {
  double total = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (!(pi[i] >= 0.0) || !std::isfinite(pi[i]))
      throw std::invalid_argument("probabilities must be finite and non-negative");
    total += pi[i];
    cumulative_[i] = total;
  }
  if (!(total > 0.0)) throw std::invalid_argument("probabilities sum to zero");
  for (double& c : cumulative_) c /= total;
}

std::size_t CategoricalSampler::operator()(Rng& rng) const {
  const double u = uniform_real(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t i = static_cast<std::size_t>(it - cumulative_.begin());
  if (i >= cumulative_.size()) i = cumulative_.size() - 1;
  // skip zero-probability tail entries that share the final cumulative value
  while (i > 0 && cumulative_[i] == cumulative_[i - 1]) --i;
  return i;
}

namespace {

std::vector<double> random_unit_start(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (double& x : w) x = standard_normal(rng);
  return w;
}

struct Batch {
  double sum = 0.0;
  std::vector<double> coord_sum;
  std::vector<std::uint64_t> coord_count;
};

}  // namespace

double RateEstimate::max_residual() const {
  double r = 0.0;
  for (double v : rho_i) r = std::max(r, std::abs(v - rho));
  return r;
}

RateEstimate estimate_rho(const QuadraticInstance& instance, std::span<const double> pi,
                          std::uint64_t seed, const RateOptions& options) {
  const std::size_t n = instance.size();
  if (pi.size() != n) throw std::invalid_argument("distribution has wrong dimension");
  for (double p : pi)
    if (!(p > 0.0)) throw std::invalid_argument("distribution must lie in the open simplex");
  if (!(options.rel_tol > 0.0)) throw std::invalid_argument("relative tolerance must be positive");
  const std::size_t target_batches = std::max<std::size_t>(options.batches, 2);

  Rng rng(seed);
  const CategoricalSampler sample(pi);
  MarkovChain chain(instance, random_unit_start(n, rng));

  RateEstimate est;
  est.rho_i.assign(n, 0.0);
  est.rho_i_stderr.assign(n, 0.0);
  est.rho_ij.assign(n * n, 0.0);
  est.counts.assign(n, 0);

  const std::uint64_t burn_in = options.burn_in ? options.burn_in : 100 * n;
  for (std::uint64_t s = 0; s < burn_in; ++s) {
    chain.step(sample(rng));
    if (chain.terminated()) {
      est.finite_termination = true;
      return est;
    }
  }

  const double log_f0 = chain.log_value();
  std::vector<double> pair_sum(n * n, 0.0);
  std::vector<std::uint64_t> pair_count(n * n, 0);
  std::vector<Batch> batches;
  Batch current{0.0, std::vector<double>(n, 0.0), std::vector<std::uint64_t>(n, 0)};
  std::uint64_t batch_size = std::max<std::uint64_t>(options.initial_batch_size, 1);
  std::uint64_t in_batch = 0;
  std::uint64_t steps = 0;

  double mean = 0.0;
  double se = std::numeric_limits<double>::infinity();

  while (steps < options.max_steps) {
    const std::size_t prev = chain.last_coordinate();
    const std::size_t i = sample(rng);
    const double drop = chain.step(i);
    if (chain.terminated()) {
      est.finite_termination = true;
      return est;
    }
    ++steps;
    current.sum += drop;
    current.coord_sum[i] += drop;
    ++current.coord_count[i];
    pair_sum[prev * n + i] += drop;
    ++pair_count[prev * n + i];
    if (++in_batch < batch_size) continue;

    batches.push_back(current);
    current.sum = 0.0;
    std::fill(current.coord_sum.begin(), current.coord_sum.end(), 0.0);
    std::fill(current.coord_count.begin(), current.coord_count.end(), 0);
    in_batch = 0;

    if (batches.size() >= 2 * target_batches) {
      for (std::size_t b = 0; b < target_batches; ++b) {
        Batch& dst = batches[b];
        const Batch& x = batches[2 * b];
        const Batch& y = batches[2 * b + 1];
        Batch merged{x.sum + y.sum, x.coord_sum, x.coord_count};
        for (std::size_t k = 0; k < n; ++k) {
          merged.coord_sum[k] += y.coord_sum[k];
          merged.coord_count[k] += y.coord_count[k];
        }
        dst = std::move(merged);
      }
      batches.resize(target_batches);
      batch_size *= 2;
    }

    if (batches.size() >= target_batches) {
      const double m = static_cast<double>(batches.size());
      double s1 = 0.0, s2 = 0.0;
      for (const auto& b : batches) {
        const double v = b.sum / static_cast<double>(batch_size);
        s1 += v;
        s2 += v * v;
      }
      mean = s1 / m;
      const double var = std::max(0.0, (s2 - m * mean * mean) / (m - 1.0));
      se = std::sqrt(var / m);
      if (mean > 0.0 && se < options.rel_tol * mean) {
        est.converged = true;
        break;
      }
    }
  }

  // Statistics over completed batches only.
  std::vector<double> coord_sum(n, 0.0);
  std::vector<std::uint64_t> coord_count(n, 0);
  double total = 0.0;
  std::uint64_t measured = 0;
  for (const auto& b : batches) {
    total += b.sum;
    for (std::size_t k = 0; k < n; ++k) {
      coord_sum[k] += b.coord_sum[k];
      coord_count[k] += b.coord_count[k];
      measured += b.coord_count[k];
    }
  }
  if (measured == 0) {
    // max_steps exhausted before a single batch completed
    total = current.sum;
    coord_sum = current.coord_sum;
    coord_count = current.coord_count;
    measured = in_batch;
  }
  est.samples = measured;
  est.rho = measured ? total / static_cast<double>(measured) : 0.0;
  est.stderr = batches.size() >= 2 ? se : std::numeric_limits<double>::infinity();
  if (!std::isfinite(se) && batches.size() >= 2) {
    const double m = static_cast<double>(batches.size());
    double s2 = 0.0;
    for (const auto& b : batches) {
      const double v = b.sum / static_cast<double>(batch_size) - est.rho;
      s2 += v * v;
    }
    est.stderr = std::sqrt(s2 / (m - 1.0) / m);
  }
  for (std::size_t k = 0; k < n; ++k) {
    est.counts[k] = coord_count[k];
    est.rho_i[k] = coord_count[k] ? coord_sum[k] / static_cast<double>(coord_count[k]) : 0.0;
    double s1 = 0.0, s2 = 0.0;
    double used = 0.0;
    for (const auto& b : batches) {
      if (b.coord_count[k] == 0) continue;
      const double v = b.coord_sum[k] / static_cast<double>(b.coord_count[k]);
      s1 += v;
      s2 += v * v;
      used += 1.0;
    }
    if (used >= 2.0) {
      const double mu = s1 / used;
      est.rho_i_stderr[k] = std::sqrt(std::max(0.0, (s2 - used * mu * mu) / (used - 1.0)) / used);
    } else {
      est.rho_i_stderr[k] = std::numeric_limits<double>::infinity();
    }
  }
  for (std::size_t k = 0; k < n * n; ++k)
    est.rho_ij[k] = pair_count[k] ? pair_sum[k] / static_cast<double>(pair_count[k]) : 0.0;
  // The endpoint formula includes the steps of an unfinished batch.
  est.endpoint_rho = steps ? (log_f0 - chain.log_value()) / static_cast<double>(steps) : 0.0;
  return est;
}

double simulate_log_value(const QuadraticInstance& instance, std::span<const double> pi,
                          std::uint64_t steps, std::uint64_t seed) {
  Rng rng(seed);
  const CategoricalSampler sample(pi);
  MarkovChain chain(instance, random_unit_start(instance.size(), rng));
  for (std::uint64_t s = 0; s < steps && !chain.terminated(); ++s) chain.step(sample(rng));
  return chain.log_value();
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> normalized_exp(std::span<const double> log_p) {
  const double top = *std::max_element(log_p.begin(), log_p.end());
  std::vector<double> p(log_p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += p[i] = std::exp(log_p[i] - top);
  for (double& x : p) x /= total;
  return p;
}

std::vector<double> tolerance_phases(double target) {
  std::vector<double> phases;
  for (double t : {3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5})
    if (t > target * (1.0 + 1e-9)) phases.push_back(t);
  phases.push_back(target);
  return phases;
}

}  // namespace

BalanceResult balance_rprop(const QuadraticInstance& instance, std::uint64_t seed,
                            const BalanceOptions& options) {
  const std::size_t n = instance.size();
  const std::vector<double> phases = tolerance_phases(options.rel_tol);
  std::size_t phase = 0;

  std::vector<double> log_p(n, 0.0);
  std::vector<double> step(n, options.initial_step);
  std::vector<int> prev_sign(n, 0);

  BalanceResult result;
  result.pi = normalized_exp(log_p);
  BalanceResult best;
  bool have_best = false;
  double best_score = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    RateOptions rate = options.rate;
    rate.rel_tol = phases[phase];
    const std::vector<double> pi = normalized_exp(log_p);
    RateEstimate est = estimate_rho(instance, pi, derive_seed(seed, it), rate);
    result.iterations = it + 1;
    if (est.finite_termination) {
      result.pi = pi;
      result.estimate = std::move(est);
      result.finite_termination = true;
      return result;
    }

    const double residual = est.max_residual();
    const bool final_phase = phase + 1 == phases.size();
    if (final_phase) {
      const double score = residual / est.stderr;
      if (score < best_score) {
        best_score = score;
        best.pi = pi;
        best.estimate = est;
        best.relative_residual = residual / est.rho;
        have_best = true;
      }
    }
    if (residual < options.threshold * est.stderr) {
      if (final_phase) {
        result.pi = pi;
        result.relative_residual = residual / est.rho;
        result.estimate = std::move(est);
        result.converged = true;
        return result;
      }
      ++phase;
      continue;
    }

    for (std::size_t i = 0; i < n; ++i) {
      const double diff = est.rho_i[i] - est.rho;
      const int sign = diff > 0.0 ? 1 : (diff < 0.0 ? -1 : 0);
      if (sign * prev_sign[i] > 0) {
        step[i] = std::min(step[i] * options.increase, options.max_step);
      } else if (sign * prev_sign[i] < 0) {
        step[i] = std::max(step[i] * options.decrease, options.min_step);
        prev_sign[i] = 0;
        continue;
      }
      log_p[i] += sign * step[i];
      prev_sign[i] = sign;
    }
  }

  if (have_best) {
    best.iterations = result.iterations;
    return best;
  }
  result.pi = normalized_exp(log_p);
  result.estimate = estimate_rho(instance, result.pi, derive_seed(seed, options.max_iterations),
                                 [&] {
                                   RateOptions r = options.rate;
                                   r.rel_tol = phases[phase];
                                   return r;
                                 }());
  result.relative_residual = result.estimate.max_residual() / result.estimate.rho;
  return result;
}

std::vector<double> gamma_point(std::span<const double> pi, std::size_t i, double t) {
  std::vector<double> g(pi.begin(), pi.end());
  g.at(i) *= std::exp2(t);
  const double total = std::accumulate(g.begin(), g.end(), 0.0);
  for (double& x : g) x /= total;
  return g;
}

std::vector<double> default_t_grid() { return {-1.0, -0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5, 1.0}; }

GammaScan gamma_scan(const QuadraticInstance& instance, std::span<const double> pi_bar,
                     std::span<const double> t_grid, std::uint64_t seed,
                     const RateOptions& options, std::size_t threads) {
  const std::size_t n = instance.size();
  GammaScan scan;
  scan.base = estimate_rho(instance, pi_bar, derive_seed(seed, 0), options);
  if (scan.base.finite_termination)
    throw NumericalError("chain terminates in finitely many steps; no rate to scan");

  scan.rows.resize(n * t_grid.size());
  std::vector<std::size_t> jobs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
      GammaRow& row = scan.rows[i * t_grid.size() + k];
      row.i = i;
      row.t = t_grid[k];
      if (t_grid[k] != 0.0) jobs.push_back(i * t_grid.size() + k);
    }

  const double base_rel = scan.base.stderr / scan.base.rho;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      GammaRow& row = scan.rows[jobs[j]];
      const auto pi = gamma_point(pi_bar, row.i, row.t);
      const auto est = estimate_rho(instance, pi, derive_seed(seed, 1 + jobs[j]), options);
      if (est.finite_termination) {
        failed = true;
        continue;
      }
      row.ratio = est.rho / scan.base.rho;
      const double rel = est.stderr / est.rho;
      row.stderr = row.ratio * std::sqrt(rel * rel + base_rel * base_rel);
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(jobs.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failed) throw NumericalError("chain terminated during gamma scan");
  return scan;
}

}  // namespace acf::markov
