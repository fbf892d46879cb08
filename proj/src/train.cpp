#include <chrono>
#include <string>

#include "acf/driver.hpp"
#include "acf/error.hpp"
#include "acf/solvers.hpp"

namespace acf {

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::lasso: return "lasso";
    case ProblemKind::svm: return "svm";
    case ProblemKind::logreg: return "logreg";
    case ProblemKind::mcsvm: return "mcsvm";
  }
  return "unknown";
}

std::string_view to_string(Selection selection) {
  return selection == Selection::acf ? "acf" : "uniform";
}

ProblemKind parse_problem_kind(std::string_view name) {
  if (name == "lasso") return ProblemKind::lasso;
  if (name == "svm") return ProblemKind::svm;
  if (name == "logreg") return ProblemKind::logreg;
  if (name == "mcsvm") return ProblemKind::mcsvm;
  throw ConfigError("unknown problem '" + std::string(name) + "'");
}

Selection parse_selection(std::string_view name) {
  if (name == "acf") return Selection::acf;
  if (name == "uniform") return Selection::uniform;
  throw ConfigError("unknown selection '" + std::string(name) + "'");
}

LabelKind label_kind_for(ProblemKind kind) {
  return kind == ProblemKind::lasso ? LabelKind::regression : LabelKind::classification;
}

void SolverConfig::validate() const {
  if (!(regularization > 0.0)) throw ConfigError("regularization parameter must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  acf.validate();
}

namespace {

template <class Problem>
TrainResult timed_run(Problem& problem, const SolverConfig& config,
                      std::chrono::steady_clock::time_point start) {
  TrainResult result = run_coordinate_descent(problem, config);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace

TrainResult train(const SparseDataset& data, ProblemKind kind, const SolverConfig& config) {
  config.validate();
  if (data.kind() != label_kind_for(kind))
    throw DataError(std::string("labels do not match problem '") + std::string(to_string(kind)) +
                    "'");
  const auto start = std::chrono::steady_clock::now();
  switch (kind) {
    case ProblemKind::lasso: {
      LassoProblem p(data, config.regularization);
      return timed_run(p, config, start);
    }
    case ProblemKind::svm: {
      SvmDualProblem p(data, config.regularization);
      return timed_run(p, config, start);
    }
    case ProblemKind::logreg: {
      LogRegDualProblem p(data, config.regularization);
      return timed_run(p, config, start);
    }
    case ProblemKind::mcsvm: {
      McSvmProblem p(data, config.regularization, config.epsilon);
      return timed_run(p, config, start);
    }
  }
  throw ConfigError("unknown problem kind");
}

}  // namespace acf
