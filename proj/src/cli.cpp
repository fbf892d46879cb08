#include "acf/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "acf/error.hpp"
#include "acf/markov.hpp"
#include "acf/solvers.hpp"
#include "acf/sparse.hpp"

namespace acf::cli {

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first == std::string::npos) throw ConfigError("empty entry in list '" + text + "'");
    const std::string token = item.substr(first, last - first + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v))
      throw ConfigError("invalid number '" + token + "'");
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError("empty list");
  return values;
}

std::string format_real(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

const std::string& run_csv_header() {
  static const std::string header =
      "problem,dataset,param,selection,epsilon,seed,iterations,operations,seconds,objective,"
      "converged,speedup_iterations,speedup_operations";
  return header;
}

namespace {

std::size_t env_threads() {
  const char* s = std::getenv("ACF_THREADS");
  if (!s || !*s) return 1;
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s, s + std::strlen(s), v);
  if (ec != std::errc() || *ptr != '\0' || v == 0)
    throw ConfigError("ACF_THREADS must be a positive integer");
  return v;
}

// Runs job(0..count-1) on up to `threads` workers; the first exception in
// job order is rethrown after all workers finish.
template <class Job>
void parallel_for(std::size_t count, std::size_t threads, Job job) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < count;) {
      try {
        job(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(threads, count);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct RunSpec {
  double param;
  Selection selection;
};

struct TrainOptions {
  std::string problem;
  std::string data;
  std::string grid = "1";
  double epsilon = 0.01;
  std::string selection = "acf";
  std::uint64_t seed = 1;
  std::size_t max_epochs = 10000;
  std::string out;
  std::string model_out;
  std::string prefs_out;
  AcfConfig acf;
};

// "model.csv" -> "model.0.1.acf.csv" when several runs share one path.
std::filesystem::path per_run_path(const std::string& base, const RunSpec& run, bool multiple) {
  std::filesystem::path p(base);
  if (!multiple) return p;
  const std::string tag =
      "." + format_real(run.param) + "." + std::string(to_string(run.selection));
  return p.parent_path() / (p.stem().string() + tag + p.extension().string());
}

void write_model(const std::filesystem::path& path, const TrainResult& r, std::size_t dim) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << "vector,index,value\n";
  for (std::size_t k = 0; k < r.weight_vectors; ++k)
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = r.weights[k * dim + j];
      if (v != 0.0) f << k << ',' << j << ',' << format_real(v) << '\n';
    }
}

void write_preferences(const std::filesystem::path& path, std::span<const double> prefs) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  double total = 0.0;
  for (double p : prefs) total += p;
  f << "i,p,pi\n";
  for (std::size_t i = 0; i < prefs.size(); ++i)
    f << i << ',' << format_real(prefs[i]) << ',' << format_real(prefs[i] / total) << '\n';
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
  const ProblemKind kind = parse_problem_kind(o.problem);
  const std::vector<double> grid = parse_grid(o.grid);
  std::vector<Selection> selections;
  if (o.selection == "both")
    selections = {Selection::uniform, Selection::acf};
  else
    selections = {parse_selection(o.selection)};

  std::vector<RunSpec> runs;
  for (double param : grid)
    for (Selection s : selections) runs.push_back({param, s});

  // Validate everything before touching the data file.
  for (const auto& run : runs) {
    SolverConfig cfg;
    cfg.regularization = run.param;
    cfg.epsilon = o.epsilon;
    cfg.acf = o.acf;
    cfg.validate();
  }

  const SparseDataset data = load_libsvm(o.data, label_kind_for(kind));

  std::vector<TrainResult> results(runs.size());
  parallel_for(runs.size(), env_threads(), [&](std::size_t k) {
    SolverConfig cfg;
    cfg.regularization = runs[k].param;
    cfg.epsilon = o.epsilon;
    cfg.selection = runs[k].selection;
    cfg.acf = o.acf;
    cfg.seed = o.seed;
    cfg.max_epochs = o.max_epochs;
    results[k] = train(data, kind, cfg);
  });

  std::ofstream file;
  std::ostream* sink = &out;
  if (!o.out.empty()) {
    const bool fresh =
        !std::filesystem::exists(o.out) || std::filesystem::file_size(o.out) == 0;
    file.open(o.out, std::ios::app);
    if (!file) throw DataError("cannot write '" + o.out + "'");
    sink = &file;
    if (fresh) *sink << run_csv_header() << '\n';
  } else {
    *sink << run_csv_header() << '\n';
  }

  const bool paired = selections.size() == 2;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const TrainResult& r = results[k];
    std::string speed_it, speed_ops;
    if (paired) {
      const std::size_t base = k - k % 2;
      const TrainResult& u = results[base];
      const TrainResult& a = results[base + 1];
      if (a.iterations > 0)
        speed_it = format_real(static_cast<double>(u.iterations) / static_cast<double>(a.iterations));
      if (a.operations > 0)
        speed_ops =
            format_real(static_cast<double>(u.operations) / static_cast<double>(a.operations));
    }
    *sink << to_string(kind) << ',' << o.data << ',' << format_real(runs[k].param) << ','
          << to_string(runs[k].selection) << ',' << format_real(o.epsilon) << ',' << o.seed << ','
          << r.iterations << ',' << r.operations << ',' << format_real(r.seconds) << ','
          << format_real(r.objective) << ',' << (r.converged ? "true" : "false") << ','
          << speed_it << ',' << speed_ops << '\n';
  }
  sink->flush();

  const bool multiple = runs.size() > 1;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    if (!o.model_out.empty())
      write_model(per_run_path(o.model_out, runs[k], multiple), results[k], data.num_features());
    if (!o.prefs_out.empty() && runs[k].selection == Selection::acf)
      write_preferences(per_run_path(o.prefs_out, runs[k], multiple), results[k].preferences);
  }
  return kSuccess;
}

struct MarkovOptions {
  std::size_t n = 0;
  double sigma = 3.0;
  std::uint64_t seed = 1;
  double rel_tol = 1e-4;
  std::string t_grid;
  std::string out;
  std::string instance_out;
  std::size_t threads = 0;
  std::size_t max_iterations = 200;
};

int cmd_markov(const MarkovOptions& o, std::ostream& out, std::ostream& err) {
  if (o.n < 2) throw ConfigError("--n must be at least 2");
  if (!(o.sigma > 0.0)) throw ConfigError("--sigma must be positive");
  if (!(o.rel_tol > 0.0)) throw ConfigError("--rel-tol must be positive");
  const std::vector<double> grid = o.t_grid.empty() ? markov::default_t_grid() : parse_grid(o.t_grid);
  const std::size_t threads = o.threads ? o.threads : env_threads();

  const auto instance = markov::generate_rbf_instance(o.n, o.sigma, derive_seed(o.seed, 0));
  if (!o.instance_out.empty()) {
    std::ofstream f(o.instance_out);
    if (!f) throw DataError("cannot write '" + o.instance_out + "'");
    instance.write_text(f);
  }

  markov::BalanceOptions bopt;
  bopt.rel_tol = o.rel_tol;
  bopt.max_iterations = o.max_iterations;
  const auto balanced = markov::balance_rprop(instance, derive_seed(o.seed, 1), bopt);
  if (balanced.finite_termination)
    throw NumericalError("chain terminates in finitely many steps; rates are undefined");

  markov::RateOptions ropt;
  ropt.rel_tol = o.rel_tol;
  const auto scan =
      markov::gamma_scan(instance, balanced.pi, grid, derive_seed(o.seed, 2), ropt, threads);

  std::ofstream file;
  std::ostream* sink = &out;
  std::ostream* log = &err;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw DataError("cannot write '" + o.out + "'");
    sink = &file;
    log = &out;
  }
  *sink << "i,t,ratio,stderr\n";
  for (const auto& row : scan.rows)
    *sink << row.i << ',' << format_real(row.t) << ',' << format_real(row.ratio) << ','
          << format_real(row.stderr) << '\n';
  sink->flush();

  *log << "pi_bar";
  for (double p : balanced.pi) *log << ' ' << format_real(p);
  *log << "\nrho " << format_real(scan.base.rho) << " stderr " << format_real(scan.base.stderr)
       << "\nbalance iterations " << balanced.iterations << " residual "
       << format_real(balanced.relative_residual)
       << (balanced.converged ? "" : " (not converged, best iterate)") << '\n';
  return kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coordinate descent with adaptive coordinate frequencies", "acf"};
  app.require_subcommand(1);

  TrainOptions t;
  auto* train_cmd = app.add_subcommand("train", "Train models and append run records to a CSV");
  train_cmd->add_option("--problem", t.problem, "lasso, svm, logreg or mcsvm")->required();
  train_cmd->add_option("--data", t.data, "libsvm-format data file")->required();
  train_cmd->add_option("--lambda,-C", t.grid, "Regularization value or comma-separated grid");
  train_cmd->add_option("--epsilon", t.epsilon, "KKT stopping tolerance");
  train_cmd->add_option("--selection", t.selection, "uniform, acf or both");
  train_cmd->add_option("--seed", t.seed);
  train_cmd->add_option("--max-epochs", t.max_epochs);
  train_cmd->add_option("--out", t.out, "CSV file to append to (stdout when omitted)");
  train_cmd->add_option("--model-out", t.model_out, "Write nonzero weights as CSV");
  train_cmd->add_option("--prefs-out", t.prefs_out, "Write final ACF preferences as CSV");
  train_cmd->add_option("--acf-c", t.acf.c);
  train_cmd->add_option("--p-min", t.acf.p_min);
  train_cmd->add_option("--p-max", t.acf.p_max);

  MarkovOptions m;
  auto* markov_cmd =
      app.add_subcommand("markov", "Balance progress rates on an RBF quadratic and scan curves");
  markov_cmd->add_option("--n", m.n, "Dimension (at least 2)")->required();
  markov_cmd->add_option("--sigma", m.sigma, "Kernel width");
  markov_cmd->add_option("--seed", m.seed);
  markov_cmd->add_option("--rel-tol", m.rel_tol, "Relative standard error target");
  markov_cmd->add_option("--t-grid", m.t_grid, "Comma-separated curve parameters");
  markov_cmd->add_option("--out", m.out, "CSV output (stdout when omitted)");
  markov_cmd->add_option("--instance-out", m.instance_out, "Write Q as dense text");
  markov_cmd->add_option("--threads", m.threads, "Concurrent scan points (default ACF_THREADS)");
  markov_cmd->add_option("--max-iterations", m.max_iterations, "Balancer iteration cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kSuccess;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(t, out);
    return cmd_markov(m, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
}

}  // namespace acf::cli
