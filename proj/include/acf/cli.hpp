#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace acf::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// Comma-separated list of reals, e.g. "0.01,0.1,1". Throws ConfigError.
std::vector<double> parse_grid(const std::string& text);

// Shortest representation that parses back to the same double.
std::string format_real(double v);

// Header of the run table written by `train`.
const std::string& run_csv_header();

// Entry point shared by the executable and the tests. Subcommands:
//   train   fit one or more models, appending rows to a CSV table
//   markov  balance a random RBF quadratic and scan the gamma curves
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace acf::cli
