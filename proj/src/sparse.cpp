#include "acf/sparse.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "acf/error.hpp"

namespace acf {

SparseVector::SparseVector(std::vector<SparseEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (k > 0 && entries_[k].index <= entries_[k - 1].index)
      throw std::invalid_argument("sparse vector indices must be strictly increasing");
    if (entries_[k].value == 0.0 || !std::isfinite(entries_[k].value))
      throw std::invalid_argument("sparse vector values must be finite and non-zero");
  }
}

double SparseVector::at(std::size_t index) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                             [](const SparseEntry& e, std::size_t i) { return e.index < i; });
  return (it != entries_.end() && it->index == index) ? it->value : 0.0;
}

double SparseVector::squared_norm() const noexcept {
  double s = 0.0;
  for (const auto& e : entries_) s += e.value * e.value;
  return s;
}

SparseDataset SparseDataset::from_rows(std::vector<SparseVector> rows, std::vector<double> labels,
                                       LabelKind kind, std::size_t num_features) {
  if (rows.empty()) throw DataError("empty dataset");
  if (rows.size() != labels.size()) throw DataError("label count does not match row count");

  SparseDataset data;
  data.kind_ = kind;

  std::size_t dim = num_features;
  for (const auto& r : rows) dim = std::max(dim, r.extent());

  // Counting pass, then fill pass. Rows are visited in order, so every
  // column comes out sorted by example index.
  std::vector<std::size_t> counts(dim, 0);
  for (const auto& r : rows)
    for (const auto& e : r.entries_) ++counts[e.index];
  data.columns_.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) data.columns_[j].entries_.reserve(counts[j]);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& e : rows[i].entries_) data.columns_[e.index].entries_.push_back({i, e.value});
    data.nnz_ += rows[i].nnz();
  }

  for (double y : labels)
    if (!std::isfinite(y)) throw DataError("non-finite label");

  if (kind == LabelKind::classification) {
    std::map<double, int> ids;
    for (double y : labels) ids.emplace(y, 0);
    int next = 0;
    for (auto& [value, id] : ids) {
      id = next++;
      data.class_values_.push_back(value);
    }
    data.classes_.reserve(labels.size());
    for (double y : labels) data.classes_.push_back(ids.at(y));
  }

  data.rows_ = std::move(rows);
  data.labels_ = std::move(labels);
  return data;
}

std::vector<double> SparseDataset::binary_signs() const {
  if (kind_ != LabelKind::classification || class_values_.size() != 2)
    throw DataError("binary problem requires exactly two classes, found " +
                    std::to_string(class_values_.size()));
  std::vector<double> y(classes_.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = classes_[i] == 1 ? 1.0 : -1.0;
  return y;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

double parse_real(std::string_view token, std::size_t line, const char* what) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value))
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(token) + "'");
  return value;
}

std::size_t parse_index(std::string_view token, std::size_t line) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw ParseError(line, "invalid feature index '" + std::string(token) + "'");
  if (value == 0) throw ParseError(line, "feature indices are 1-based");
  return value - 1;
}

}  // namespace

SparseDataset parse_libsvm(std::istream& in, LabelKind kind) {
  std::vector<SparseVector> rows;
  std::vector<double> labels;
  std::string text;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::string_view rest(text);
    std::vector<std::string_view> tokens;
    while (!rest.empty()) {
      std::size_t b = 0;
      while (b < rest.size() && is_space(rest[b])) ++b;
      std::size_t e = b;
      while (e < rest.size() && !is_space(rest[e])) ++e;
      if (e > b) tokens.push_back(rest.substr(b, e - b));
      rest.remove_prefix(e);
    }
    if (tokens.empty()) continue;

    double label = parse_real(tokens[0], line_no, "label");
    std::vector<SparseEntry> entries;
    entries.reserve(tokens.size() - 1);
    std::size_t last = 0;
    bool have_last = false;
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      auto colon = tokens[k].find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line_no, "expected <index>:<value>, got '" + std::string(tokens[k]) + "'");
      std::size_t index = parse_index(tokens[k].substr(0, colon), line_no);
      double value = parse_real(tokens[k].substr(colon + 1), line_no, "feature value");
      if (have_last && index == last)
        throw ParseError(line_no, "duplicate feature index " + std::to_string(index + 1));
      if (have_last && index < last)
        throw ParseError(line_no, "feature indices not increasing at " + std::to_string(index + 1));
      last = index;
      have_last = true;
      dim = std::max(dim, index + 1);
      if (value != 0.0) entries.push_back({index, value});
    }
    rows.emplace_back(std::move(entries));
    labels.push_back(label);
  }
  if (in.bad()) throw DataError("read error");
  if (rows.empty()) throw DataError("empty dataset");
  return SparseDataset::from_rows(std::move(rows), std::move(labels), kind, dim);
}

SparseDataset parse_libsvm(std::string_view text, LabelKind kind) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, kind);
}

SparseDataset load_libsvm(const std::filesystem::path& path, LabelKind kind) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_libsvm(in, kind);
}

namespace {

void put_real(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, ptr - buf);
}

}  // namespace

void write_libsvm(std::ostream& out, const SparseDataset& data) {
  for (std::size_t i = 0; i < data.num_examples(); ++i) {
    put_real(out, data.labels()[i]);
    for (const auto& e : data.row(i).entries()) {
      out << ' ' << (e.index + 1) << ':';
      put_real(out, e.value);
    }
    out << '\n';
  }
}

double dot(std::span<const double> w, const SparseVector& v, OpCounter& counter) {
  if (w.size() < v.extent()) throw std::out_of_range("dense vector shorter than sparse extent");
  double s = 0.0;
  for (const auto& e : v.entries()) s += w[e.index] * e.value;
  counter.add(v.nnz());
  return s;
}

void axpy(std::span<double> w, const SparseVector& v, double scale) {
  if (w.size() < v.extent()) throw std::out_of_range("dense vector shorter than sparse extent");
  if (scale == 0.0) return;
  for (const auto& e : v.entries()) w[e.index] += scale * e.value;
}

double dot_row(std::span<const double> w, const SparseDataset& data, std::size_t i,
               OpCounter& counter) {
  return dot(w, data.row(i), counter);
}

void axpy_row(std::span<double> w, const SparseDataset& data, std::size_t i, double scale) {
  axpy(w, data.row(i), scale);
}

double dot_column(std::span<const double> r, const SparseDataset& data, std::size_t j,
                  OpCounter& counter) {
  return dot(r, data.column(j), counter);
}

void axpy_column(std::span<double> r, const SparseDataset& data, std::size_t j, double scale) {
  axpy(r, data.column(j), scale);
}

}  // namespace acf
