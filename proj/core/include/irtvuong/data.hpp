#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace irtvuong {

// Shape of a response dataset: number of items and categories per item.
struct DataShape {
  std::vector<int> categories;

  int n_items() const { return static_cast<int>(categories.size()); }
  bool operator==(const DataShape&) const = default;
};

// N x J matrix of categorical responses coded 0..K_j-1. Immutable once built.
class ResponseMatrix {
 public:
  ResponseMatrix() = default;

  // cells are row-major (person-major), length n_persons * categories.size().
  ResponseMatrix(int n_persons, std::vector<int> categories, std::vector<int> cells);

  int n_persons() const { return n_persons_; }
  int n_items() const { return static_cast<int>(categories_.size()); }
  int categories(int item) const { return categories_[static_cast<std::size_t>(item)]; }
  const std::vector<int>& categories() const { return categories_; }
  DataShape shape() const { return DataShape{categories_}; }

  int at(int person, int item) const {
    return cells_[static_cast<std::size_t>(person) * categories_.size() +
                  static_cast<std::size_t>(item)];
  }
  std::span<const int> row(int person) const {
    return {cells_.data() + static_cast<std::size_t>(person) * categories_.size(),
            categories_.size()};
  }
  const std::vector<int>& cells() const { return cells_; }

  // Stable 64-bit digest of shape and cells; used to check that two fits
  // were computed on the same data.
  std::uint64_t fingerprint() const { return fingerprint_; }

  bool operator==(const ResponseMatrix& other) const {
    return n_persons_ == other.n_persons_ && categories_ == other.categories_ &&
           cells_ == other.cells_;
  }

 private:
  int n_persons_ = 0;
  std::vector<int> categories_;
  std::vector<int> cells_;
  std::uint64_t fingerprint_ = 0;
};

struct CsvOptions {
  bool header = false;
  std::vector<std::string> na_codes{"NA", ""};
  // Overrides K_j inference (max observed code + 1) when set.
  std::optional<std::vector<int>> categories;
};

struct CsvLoadResult {
  ResponseMatrix data;
  std::size_t dropped_rows = 0;  // listwise deletion count
  std::vector<std::string> column_names;
};

CsvLoadResult load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
CsvLoadResult parse_csv(const std::string& text, const CsvOptions& options = {});

void write_csv(const ResponseMatrix& data, const std::filesystem::path& path,
               const std::vector<std::string>& column_names = {});
std::string to_csv(const ResponseMatrix& data, const std::vector<std::string>& column_names = {});

// counts[j][k] = number of persons answering category k on item j.
using FrequencyTable = std::vector<std::vector<long>>;
FrequencyTable summarize(const ResponseMatrix& data);

}  // namespace irtvuong
