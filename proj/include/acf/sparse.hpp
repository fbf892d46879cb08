#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace acf {

struct SparseEntry {
  std::size_t index;
  double value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

// Sorted list of non-zero entries. Indices are strictly increasing and no
// explicit zeros are stored.
class SparseVector {
 public:
  SparseVector() = default;

  // Throws std::invalid_argument if indices are not strictly increasing or a
  // stored value is zero or non-finite.
  explicit SparseVector(std::vector<SparseEntry> entries);

  std::span<const SparseEntry> entries() const noexcept { return entries_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  // Value at `index`, zero when not stored. O(log nnz).
  double at(std::size_t index) const;
  double squared_norm() const noexcept;

  // One past the largest stored index (0 for an empty vector).
  std::size_t extent() const noexcept { return entries_.empty() ? 0 : entries_.back().index + 1; }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  friend class SparseDataset;
  std::vector<SparseEntry> entries_;
};

enum class LabelKind { regression, classification };

// Tally of multiply-add operations spent in derivative computations.
class OpCounter {
 public:
  void add(std::uint64_t ops) noexcept { count_ += ops; }
  std::uint64_t value() const noexcept { return count_; }

 private:
  std::uint64_t count_ = 0;
};

// Immutable sparse design matrix with row (example) and column (feature)
// views plus labels. For classification, labels are remapped to contiguous
// class ids 0..K-1 in ascending order of the original label values.
class SparseDataset {
 public:
  // `num_features` may exceed the largest index present; 0 means "infer".
  static SparseDataset from_rows(std::vector<SparseVector> rows, std::vector<double> labels,
                                 LabelKind kind, std::size_t num_features = 0);

  std::size_t num_examples() const noexcept { return rows_.size(); }
  std::size_t num_features() const noexcept { return columns_.size(); }
  std::size_t nnz() const noexcept { return nnz_; }
  LabelKind kind() const noexcept { return kind_; }

  const SparseVector& row(std::size_t i) const { return rows_.at(i); }
  const SparseVector& column(std::size_t j) const { return columns_.at(j); }

  // Original label values, one per example.
  std::span<const double> labels() const noexcept { return labels_; }

  // Classification only.
  std::size_t num_classes() const noexcept { return class_values_.size(); }
  std::span<const int> classes() const noexcept { return classes_; }
  // class id -> original label value
  std::span<const double> class_values() const noexcept { return class_values_; }
  // -1 for class 0, +1 for class 1. Throws DataError unless K == 2.
  std::vector<double> binary_signs() const;

  friend bool operator==(const SparseDataset&, const SparseDataset&) = default;

 private:
  SparseDataset() = default;

  std::vector<SparseVector> rows_;
  std::vector<SparseVector> columns_;
  std::vector<double> labels_;
  std::vector<int> classes_;
  std::vector<double> class_values_;
  LabelKind kind_ = LabelKind::regression;
  std::size_t nnz_ = 0;
};

// libsvm text: "<label> <idx>:<val> ..." per line, 1-based indices. Blank
// lines are skipped. Throws ParseError (with the offending line number) on
// malformed lines and DataError on an empty dataset.
SparseDataset parse_libsvm(std::istream& in, LabelKind kind);
SparseDataset parse_libsvm(std::string_view text, LabelKind kind);
SparseDataset load_libsvm(const std::filesystem::path& path, LabelKind kind);

// Writes shortest round-trip representations of all numbers.
void write_libsvm(std::ostream& out, const SparseDataset& data);

// <w, v> over the stored entries of v; counts nnz(v) operations.
double dot(std::span<const double> w, const SparseVector& v, OpCounter& counter);
// w += scale * v over the stored entries of v.
void axpy(std::span<double> w, const SparseVector& v, double scale);

double dot_row(std::span<const double> w, const SparseDataset& data, std::size_t i,
               OpCounter& counter);
void axpy_row(std::span<double> w, const SparseDataset& data, std::size_t i, double scale);
double dot_column(std::span<const double> r, const SparseDataset& data, std::size_t j,
                  OpCounter& counter);
void axpy_column(std::span<double> r, const SparseDataset& data, std::size_t j, double scale);

}  // namespace acf
