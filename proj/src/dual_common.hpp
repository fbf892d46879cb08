#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "acf/sparse.hpp"

namespace acf::detail {

inline std::vector<double> primal_from_dual(const SparseDataset& data,
                                            std::span<const double> alpha,
                                            std::span<const double> y) {
  std::vector<double> w(data.num_features(), 0.0);
  for (std::size_t i = 0; i < alpha.size(); ++i) axpy_row(w, data, i, alpha[i] * y[i]);
  return w;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

}  // namespace acf::detail
