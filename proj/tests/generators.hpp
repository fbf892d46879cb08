#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "acf/random.hpp"
#include "acf/sparse.hpp"

namespace acf::testing {

// Random sparse matrix with roughly `density` * d entries per row. Labels are
// N(0,1) for regression and uniform over `classes` ids otherwise; every class
// appears at least once.
inline SparseDataset random_dataset(Rng& rng, std::size_t l, std::size_t d, double density,
                                    LabelKind kind, std::size_t classes = 2) {
  std::vector<SparseVector> rows;
  std::vector<double> labels;
  for (std::size_t i = 0; i < l; ++i) {
    std::vector<SparseEntry> e;
    for (std::size_t j = 0; j < d; ++j)
      if (uniform_real(rng) < density) e.push_back({j, standard_normal(rng)});
    rows.emplace_back(std::move(e));
    if (kind == LabelKind::regression)
      labels.push_back(standard_normal(rng));
    else
      labels.push_back(i < classes ? static_cast<double>(i)
                                   : static_cast<double>(uniform_index(rng, classes)));
  }
  return SparseDataset::from_rows(std::move(rows), std::move(labels), kind, d);
}

// Dense copy of the design matrix, row-major l x d.
inline std::vector<double> dense(const SparseDataset& data) {
  const std::size_t d = data.num_features();
  std::vector<double> x(data.num_examples() * d, 0.0);
  for (std::size_t i = 0; i < data.num_examples(); ++i)
    for (const auto& e : data.row(i).entries()) x[i * d + e.index] = e.value;
  return x;
}

inline double relative_difference(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace acf::testing
