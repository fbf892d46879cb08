#include <doctest.h>

#include <cmath>
#include <functional>

#include "acf/driver.hpp"
#include "acf/error.hpp"
#include "acf/random.hpp"
#include "acf/solvers.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace acf;
using acf::testing::random_dataset;
using acf::testing::relative_difference;

namespace {

SparseDataset make(std::vector<std::vector<SparseEntry>> rows, std::vector<double> labels,
                   LabelKind kind, std::size_t d) {
  std::vector<SparseVector> v;
  for (auto& r : rows) v.emplace_back(std::move(r));
  return SparseDataset::from_rows(std::move(v), std::move(labels), kind, d);
}

SolverConfig tight(double reg, Selection sel, std::uint64_t seed = 1) {
  SolverConfig c;
  c.regularization = reg;
  c.epsilon = 1e-9;
  c.selection = sel;
  c.seed = seed;
  c.max_epochs = 200000;
  return c;
}

// Objective of the current state in extended precision, independent of the
// solver's own bookkeeping.
long double reference(const LassoProblem& p, const SparseDataset& d, double reg) {
  return oracle::lasso_objective(d, reg, p.state().w);
}
long double reference(const SvmDualProblem& p, const SparseDataset& d, double) {
  return oracle::svm_dual_objective(d, p.state().alpha);
}
long double reference(const LogRegDualProblem& p, const SparseDataset& d, double reg) {
  return oracle::logreg_dual_objective(d, reg, p.state().alpha, p.state().alpha_complement);
}
long double reference(const McSvmProblem& p, const SparseDataset& d, double) {
  return oracle::ww_dual_objective(d, p.state().alpha);
}

template <class Problem>
Problem build(const SparseDataset& d, double reg) {
  if constexpr (std::is_same_v<Problem, McSvmProblem>)
    return Problem(d, reg, 1e-3);
  else
    return Problem(d, reg);
}

template <class Problem>
SparseDataset dataset_for(Rng& rng, std::size_t l, std::size_t d, double density) {
  if constexpr (std::is_same_v<Problem, LassoProblem>)
    return random_dataset(rng, l, d, density, LabelKind::regression);
  else if constexpr (std::is_same_v<Problem, McSvmProblem>)
    return random_dataset(rng, l, d, density, LabelKind::classification, 3);
  else
    return random_dataset(rng, l, d, density, LabelKind::classification);
}

template <class Problem>
void check_gain_consistency(double reg) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const auto data = dataset_for<Problem>(rng, 10 + 8 * seed, 5 + 9 * seed, 0.3);
    auto p = build<Problem>(data, reg);
    OpCounter counter;
    long double before = reference(p, data, reg);
    for (int s = 0; s < 400; ++s) {
      const std::size_t i = uniform_index(rng, p.num_coordinates());
      const StepResult r = p.step(i, counter);
      const long double after = reference(p, data, reg);
      const double exact = static_cast<double>(before - after);
      const double tol = 1e-8 * std::abs(exact) + 1e-13 * std::max(1.0L, std::abs(after));
      REQUIRE(std::abs(r.gain - exact) <= tol);
      before = after;
    }
  }
}

template <class Problem>
void check_descent_and_drift(double reg) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(100 + seed);
    const auto data = dataset_for<Problem>(rng, 30, 25, 0.3);
    auto p = build<Problem>(data, reg);
    OpCounter counter;
    double last = p.objective_from_scratch();
    for (int s = 1; s <= 10000; ++s) {
      p.step(uniform_index(rng, p.num_coordinates()), counter);
      if (s % 100 == 0) {
        const double now = p.objective_from_scratch();
        REQUIRE(now <= last + 1e-9 * std::max(1.0, std::abs(last)));
        last = now;
      }
    }
    if constexpr (std::is_same_v<Problem, LassoProblem>)
      CHECK(p.residual_drift() <= 1e-8);
    else
      CHECK(p.weight_drift() <= 1e-8);
  }
}

// Counts nnz of every touched coordinate independently of the solvers.
template <class Problem>
struct Shadow {
  Problem* inner;
  const SparseDataset* data;
  std::uint64_t multiplier;
  std::uint64_t expected = 0;

  std::size_t num_coordinates() const { return inner->num_coordinates(); }
  StepResult step(std::size_t i, OpCounter& counter) {
    if constexpr (std::is_same_v<Problem, LassoProblem>)
      expected += data->column(i).nnz();
    else
      expected += multiplier * data->row(i).nnz();
    return inner->step(i, counter);
  }
  double objective() const { return inner->objective(); }
  void fill(TrainResult& r) const { inner->fill(r); }
};

template <class Problem>
void check_operation_count(double reg, std::uint64_t multiplier) {
  for (Selection sel : {Selection::uniform, Selection::acf}) {
    Rng rng(77);
    const auto data = dataset_for<Problem>(rng, 25, 15, 0.3);
    auto p = build<Problem>(data, reg);
    Shadow<Problem> shadow{&p, &data, multiplier};
    SolverConfig c = tight(reg, sel);
    c.epsilon = 1e-4;
    const auto result = run_coordinate_descent(shadow, c);
    CHECK(result.converged);
    CHECK(result.operations == shadow.expected);
    if (sel == Selection::uniform)
      CHECK(result.operations == multiplier * result.epochs * data.nnz());
  }
}

double oracle_optimum(ProblemKind kind, const SparseDataset& d, double reg) {
  switch (kind) {
    case ProblemKind::lasso: return oracle::lasso_optimum(d, reg);
    case ProblemKind::svm: return oracle::svm_dual_optimum(d, reg);
    case ProblemKind::logreg: return oracle::logreg_dual_optimum(d, reg);
    case ProblemKind::mcsvm: return oracle::ww_dual_optimum(d, reg);
  }
  return 0.0;
}

}  // namespace

TEST_CASE("lasso step on a single example solves the piecewise quadratic") {
  const auto data = make({{{0, 1.0}}}, {1.0}, LabelKind::regression, 1);
  LassoProblem p(data, 0.5);
  const double expected = oracle::grid_argmin(
      [](double v) { return 0.5 * (v - 1.0) * (v - 1.0) + 0.5 * std::abs(v); }, -2.0, 2.0, 1e-6);
  OpCounter counter;
  const auto r = p.step(0, counter);
  CHECK(p.state().w[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(expected - 0.5) < 2e-6);
  // objective 0.5 at w = 0 and 0.375 at w = 0.5
  CHECK(r.gain == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(p.objective() == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(counter.value() == 1);
}

TEST_CASE("lasso keeps a zero weight when the gradient is inside the subdifferential") {
  const auto data = make({{{0, 1.0}}, {{0, 1.0}}}, {0.3, 0.1}, LabelKind::regression, 1);
  LassoProblem p(data, 0.5);
  OpCounter counter;
  const auto r = p.step(0, counter);
  CHECK(p.state().w[0] == 0.0);
  CHECK(r.gain == 0.0);
  CHECK(r.violation == 0.0);
}

TEST_CASE("lasso sign change lands exactly on zero") {
  int found = 0;
  for (std::uint64_t seed = 1; seed <= 200 && found < 5; ++seed) {
    Rng rng(seed);
    const auto data = random_dataset(rng, 6, 4, 0.8, LabelKind::regression);
    const double lambda = 0.05 + 0.2 * uniform_real(rng);
    LassoProblem p(data, lambda);
    const auto x = acf::testing::dense(data);
    OpCounter counter;
    for (int s = 0; s < 40 && found < 5; ++s) {
      const std::size_t j = uniform_index(rng, 4);
      const double w = p.state().w[j];
      const double h = p.state().col_h[j];
      double g = 0.0;
      for (std::size_t i = 0; i < 6; ++i) g += p.state().residual[i] * x[i * 4 + j];
      g /= 6.0;
      p.step(j, counter);
      if (!(w > 0.0) || h == 0.0 || w - g / h >= 0.0 || p.state().w[j] != 0.0) continue;
      ++found;
      const auto phi = [&](double v) {
        return g * (v - w) + 0.5 * h * (v - w) * (v - w) + lambda * std::abs(v);
      };
      CHECK(std::abs(oracle::grid_argmin(phi, w - 3.0, w + 3.0, 1e-6)) <= 2e-6);
    }
  }
  CHECK(found >= 1);
}

TEST_CASE("svm step from zero to the upper bound") {
  const auto data = make({{{0, 1.0}}, {{1, 1.0}}}, {1.0, -1.0}, LabelKind::classification, 2);
  SvmDualProblem p(data, 1.0);
  // class 1 (label +1) maps to sign +1
  REQUIRE(p.signs()[0] == 1.0);
  OpCounter counter;
  const auto r = p.step(0, counter);
  CHECK(p.state().alpha[0] == 1.0);
  CHECK(p.state().w[0] == 1.0);
  CHECK(p.state().w[1] == 0.0);
  CHECK(r.gain == 0.5);
  CHECK(r.violation == 1.0);
}

TEST_CASE("clipped box newton step") {
  const auto s = box_newton_step(-10.0, 1.0, 0.0, 1.0);
  CHECK(s.value == 1.0);
  CHECK(s.gain == 9.5);
  const auto idle = box_newton_step(0.0, 2.0, 0.4, 1.0);
  CHECK(idle.value == 0.4);
  CHECK(idle.gain == 0.0);
  const auto flat = box_newton_step(-2.0, 0.0, 0.25, 1.0);
  CHECK(flat.value == 1.0);
  CHECK(flat.gain == 1.5);
}

TEST_CASE("svm two point problem recovers the analytic dual") {
  const auto data = make({{{0, 1.0}, {1, 1.0}}, {{0, -1.0}, {1, 0.5}}}, {1.0, -1.0},
                         LabelKind::classification, 2);
  SolverConfig c;
  c.regularization = 1.0;
  c.epsilon = 1e-3;
  for (Selection sel : {Selection::uniform, Selection::acf}) {
    c.selection = sel;
    const auto r = train(data, ProblemKind::svm, c);
    CHECK(r.converged);
    CHECK(std::abs(r.dual[0] - 1.0 / 3.0) <= 1e-3);
    CHECK(std::abs(r.dual[1] - 2.0 / 3.0) <= 1e-3);
  }
}

TEST_CASE("entropy subproblem") {
  SUBCASE("no coupling gives the midpoint") {
    for (double c : {0.01, 1.0, 7.0, 1000.0}) {
      const auto r = minimize_entropy_quadratic(0.0, 0.0, c, 0.3 * c, 0.7 * c);
      CHECK(r.a == doctest::Approx(0.5 * c).epsilon(1e-12));
      CHECK(r.converged);
    }
  }
  SUBCASE("finite difference derivative vanishes at the returned point") {
    Rng rng(5);
    for (int k = 0; k < 100; ++k) {
      const double c = std::exp(4.0 * uniform_real(rng) - 2.0);
      const double q = 5.0 * uniform_real(rng);
      const double b = 6.0 * standard_normal(rng);
      const double start = c * (0.01 + 0.98 * uniform_real(rng));
      const auto r = minimize_entropy_quadratic(q, b, c, start, c - start);
      REQUIRE(r.a > 0.0);
      REQUIRE(r.complement > 0.0);
      const auto phi = [&](double a) {
        return 0.5 * q * a * a + b * a + a * std::log(a) + (c - a) * std::log(c - a);
      };
      const double h = 1e-3 * std::min({1e-3, r.a, r.complement});
      const double fd = (phi(r.a + h) - phi(r.a - h)) / (2.0 * h);
      // truncation plus cancellation error of the central difference
      const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(phi(r.a)) / h;
      CHECK(std::abs(fd) <= 1e-5 + slack);
    }
  }
  SUBCASE("extreme linear terms keep relative precision at the bounds") {
    for (double b : {-60.0, 60.0}) {
      const auto r = minimize_entropy_quadratic(1.0, b, 1.0, 0.5, 0.5);
      const double near = std::min(r.a, r.complement);
      CHECK(near > 0.0);
      CHECK(near < 1e-20);
      // stationarity: q a + b + log(a / (C - a)) = 0
      CHECK(std::abs(r.a + b + std::log(r.a) - std::log(r.complement)) <= 1e-9);
      CHECK(r.a + r.complement == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("logreg step stays strictly interior and never ascends") {
  Rng rng(9);
  const auto data = random_dataset(rng, 20, 8, 0.5, LabelKind::classification);
  for (double c : {0.01, 1.0, 100.0}) {
    LogRegDualProblem p(data, c);
    OpCounter counter;
    for (int s = 0; s < 2000; ++s) {
      const auto r = p.step(uniform_index(rng, 20), counter);
      REQUIRE(r.gain >= -1e-12);
    }
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(p.state().alpha[i] > 0.0);
      CHECK(p.state().alpha[i] < c);
      CHECK(p.state().alpha_complement[i] > 0.0);
    }
  }
}

TEST_CASE("logreg empty example moves to the midpoint") {
  const auto data = make({{}, {{0, 1.0}}}, {1.0, -1.0}, LabelKind::classification, 1);
  LogRegDualProblem p(data, 4.0);
  OpCounter counter;
  p.step(0, counter);
  CHECK(p.state().alpha[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("gain consistency against extended precision recomputation") {
  SUBCASE("lasso") { check_gain_consistency<LassoProblem>(0.05); }
  SUBCASE("svm") { check_gain_consistency<SvmDualProblem>(1.0); }
  SUBCASE("logreg") { check_gain_consistency<LogRegDualProblem>(2.0); }
  SUBCASE("mcsvm") { check_gain_consistency<McSvmProblem>(1.0); }
}

TEST_CASE("monotone descent and cached state consistency over 10^4 steps") {
  SUBCASE("lasso") { check_descent_and_drift<LassoProblem>(0.05); }
  SUBCASE("svm") { check_descent_and_drift<SvmDualProblem>(1.0); }
  SUBCASE("logreg") { check_descent_and_drift<LogRegDualProblem>(1.0); }
  SUBCASE("mcsvm") { check_descent_and_drift<McSvmProblem>(1.0); }
}

TEST_CASE("box constraints hold exactly") {
  Rng rng(31);
  const auto bin = random_dataset(rng, 30, 10, 0.4, LabelKind::classification);
  const auto multi = random_dataset(rng, 30, 10, 0.4, LabelKind::classification, 4);
  for (double c : {0.1, 10.0}) {
    SvmDualProblem s(bin, c);
    McSvmProblem m(multi, c, 1e-3);
    OpCounter counter;
    for (int k = 0; k < 3000; ++k) {
      s.step(uniform_index(rng, 30), counter);
      m.step(uniform_index(rng, 30), counter);
    }
    for (double a : s.state().alpha) CHECK((a >= 0.0 && a <= c));
    for (std::size_t i = 0; i < 30; ++i)
      for (std::size_t k = 0; k < 4; ++k) {
        const double a = m.state().alpha[i * 4 + k];
        if (k == static_cast<std::size_t>(multi.classes()[i]))
          CHECK(a == 0.0);
        else
          CHECK((a >= 0.0 && a <= c));
      }
  }
}

TEST_CASE("operation count matches a shadow tally") {
  SUBCASE("lasso") { check_operation_count<LassoProblem>(0.05, 1); }
  SUBCASE("svm") { check_operation_count<SvmDualProblem>(1.0, 1); }
  SUBCASE("logreg") { check_operation_count<LogRegDualProblem>(1.0, 1); }
  SUBCASE("mcsvm") { check_operation_count<McSvmProblem>(1.0, 3); }
}

TEST_CASE("kkt violation definitions") {
  CHECK(box_violation(-0.3, 0.0, 0.0, 1.0) == 0.3);
  CHECK(box_violation(-0.3, 1.0, 0.0, 1.0) == 0.0);
  CHECK(box_violation(0.3, 0.0, 0.0, 1.0) == 0.0);
  CHECK(box_violation(0.3, 1.0, 0.0, 1.0) == 0.3);
  CHECK(box_violation(-0.2, 0.5, 0.0, 1.0) == 0.2);
  CHECK(l1_violation(0.7, 0.0, 0.5) == doctest::Approx(0.2));
  CHECK(l1_violation(-0.7, 0.0, 0.5) == doctest::Approx(0.2));
  CHECK(l1_violation(0.3, 0.0, 0.5) == 0.0);
  CHECK(l1_violation(-0.5, 1.0, 0.5) == 0.0);
  CHECK(l1_violation(0.1, 1.0, 0.5) == doctest::Approx(0.6));
  CHECK(l1_violation(0.1, -1.0, 0.5) == doctest::Approx(0.4));
}

TEST_CASE("violations vanish at a tightly converged solution") {
  Rng rng(12);
  const auto reg = random_dataset(rng, 15, 10, 0.5, LabelKind::regression);
  const auto bin = random_dataset(rng, 15, 10, 0.5, LabelKind::classification);
  SolverConfig c = tight(0.1, Selection::uniform);
  c.epsilon = 1e-12;
  {
    LassoProblem p(reg, 0.1);
    CHECK(run_coordinate_descent(p, c).converged);
    CHECK(p.max_violation() <= 1e-10);
  }
  {
    SvmDualProblem p(bin, 0.1);
    CHECK(run_coordinate_descent(p, c).converged);
    CHECK(p.max_violation() <= 1e-10);
  }
}

TEST_CASE("solver objectives match brute force oracles") {
  const std::pair<ProblemKind, double> kinds[] = {{ProblemKind::lasso, 0.05},
                                                  {ProblemKind::svm, 1.0},
                                                  {ProblemKind::logreg, 1.0},
                                                  {ProblemKind::mcsvm, 1.0}};
  for (auto [kind, reg] : kinds) {
    CAPTURE(to_string(kind));
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(1000 + seed);
      const std::size_t l = 8 + 2 * seed, d = 6 + 3 * seed;
      const auto data =
          kind == ProblemKind::lasso
              ? random_dataset(rng, l, d, 0.4, LabelKind::regression)
              : random_dataset(rng, l, d, 0.4, LabelKind::classification,
                               kind == ProblemKind::mcsvm ? 3 : 2);
      const auto r = train(data, kind, tight(reg, Selection::acf, seed));
      CHECK(r.converged);
      CHECK(relative_difference(r.objective, oracle_optimum(kind, data, reg)) <= 1e-5);
    }
  }
}

TEST_CASE("zero epoch budget returns the initial state") {
  Rng rng(3);
  const auto data = random_dataset(rng, 10, 5, 0.5, LabelKind::classification);
  SolverConfig c;
  c.max_epochs = 0;
  const auto r = train(data, ProblemKind::svm, c);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 0);
  CHECK(r.objective == 0.0);
  for (double a : r.dual) CHECK(a == 0.0);
}

TEST_CASE("acf and uniform selection reach the same objective") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(200 + seed);
    const auto bin = random_dataset(rng, 60, 20, 0.3, LabelKind::classification);
    const auto reg = random_dataset(rng, 60, 20, 0.3, LabelKind::regression);
    for (auto [kind, data] :
         {std::pair{ProblemKind::svm, &bin}, std::pair{ProblemKind::logreg, &bin},
          std::pair{ProblemKind::lasso, &reg}}) {
      SolverConfig c;
      c.regularization = kind == ProblemKind::lasso ? 0.05 : 1.0;
      c.epsilon = 1e-6;
      c.seed = seed;
      c.selection = Selection::uniform;
      const auto u = train(*data, kind, c);
      c.selection = Selection::acf;
      const auto a = train(*data, kind, c);
      CHECK(u.converged);
      CHECK(a.converged);
      CHECK(relative_difference(u.objective, a.objective) <= 1e-6);
    }
  }
}

TEST_CASE("invalid input is rejected") {
  Rng rng(4);
  const auto reg = random_dataset(rng, 10, 5, 0.5, LabelKind::regression);
  const auto cls = random_dataset(rng, 10, 5, 0.5, LabelKind::classification);
  const auto three = random_dataset(rng, 10, 5, 0.5, LabelKind::classification, 3);
  SolverConfig c;
  CHECK_THROWS_AS(train(reg, ProblemKind::svm, c), DataError);
  CHECK_THROWS_AS(train(cls, ProblemKind::lasso, c), DataError);
  CHECK_THROWS_AS(train(reg, ProblemKind::mcsvm, c), DataError);
  CHECK_THROWS_AS(train(three, ProblemKind::svm, c), DataError);
  c.epsilon = 0.0;
  CHECK_THROWS_AS(train(cls, ProblemKind::svm, c), ConfigError);
  c.epsilon = 0.01;
  c.regularization = -1.0;
  CHECK_THROWS_AS(train(cls, ProblemKind::svm, c), ConfigError);
}
