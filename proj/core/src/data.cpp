#include "irtvuong/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "irtvuong/errors.hpp"

namespace irtvuong {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) {
    h ^= (v >> (8 * b)) & 0xffU;
    h *= kFnvPrime;
  }
}

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string_view rest(line);
  while (true) {
    auto comma = rest.find(',');
    fields.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return fields;
}

}  // namespace

ResponseMatrix::ResponseMatrix(int n_persons, std::vector<int> categories, std::vector<int> cells)
    : n_persons_(n_persons), categories_(std::move(categories)), cells_(std::move(cells)) {
  if (n_persons_ < 1) throw InputError("response matrix needs at least one person");
  if (categories_.empty()) throw InputError("response matrix needs at least one item");
  const std::size_t j_count = categories_.size();
  if (cells_.size() != static_cast<std::size_t>(n_persons_) * j_count)
    throw InputError("cell count does not match N x J");
  for (std::size_t j = 0; j < j_count; ++j) {
    if (categories_[j] < 2)
      throw InputError("item " + std::to_string(j + 1) + " has fewer than 2 categories");
  }
  for (std::size_t idx = 0; idx < cells_.size(); ++idx) {
    const std::size_t j = idx % j_count;
    if (cells_[idx] < 0 || cells_[idx] >= categories_[j]) {
      throw InputError("cell (person " + std::to_string(idx / j_count + 1) + ", item " +
                       std::to_string(j + 1) + ") = " + std::to_string(cells_[idx]) +
                       " outside [0, " + std::to_string(categories_[j] - 1) + "]");
    }
  }
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, static_cast<std::uint64_t>(n_persons_));
  for (int k : categories_) fnv_mix(h, static_cast<std::uint64_t>(k));
  for (int c : cells_) fnv_mix(h, static_cast<std::uint64_t>(c));
  fingerprint_ = h;
}

CsvLoadResult parse_csv(const std::string& text, const CsvOptions& options) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> names;
  std::vector<int> cells;
  std::size_t n_cols = 0;
  int n_rows = 0;
  std::size_t dropped = 0;
  bool header_pending = options.header;

  auto is_na = [&](const std::string& field) {
    return std::find(options.na_codes.begin(), options.na_codes.end(), field) !=
           options.na_codes.end();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (header_pending) {
      header_pending = false;
      names = fields;
      n_cols = fields.size();
      continue;
    }
    if (n_cols == 0) n_cols = fields.size();
    if (fields.size() != n_cols) {
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(n_cols) +
                       " columns, found " + std::to_string(fields.size()));
    }
    bool missing = false;
    std::vector<int> row;
    row.reserve(n_cols);
    for (std::size_t c = 0; c < n_cols; ++c) {
      const std::string& f = fields[c];
      if (is_na(f)) {
        missing = true;
        continue;
      }
      int value = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
      if (ec != std::errc() || ptr != f.data() + f.size() || value < 0) {
        throw InputError("line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                         ": '" + f + "' is not a non-negative integer");
      }
      row.push_back(value);
    }
    if (missing) {
      ++dropped;
      continue;
    }
    cells.insert(cells.end(), row.begin(), row.end());
    ++n_rows;
  }

  if (n_rows == 0) throw InputError("no complete response rows");

  std::vector<int> categories(n_cols, 0);
  if (options.categories) {
    if (options.categories->size() != n_cols)
      throw InputError("category override has " + std::to_string(options.categories->size()) +
                       " entries for " + std::to_string(n_cols) + " items");
    categories = *options.categories;
  } else {
    for (std::size_t idx = 0; idx < cells.size(); ++idx) {
      auto& k = categories[idx % n_cols];
      k = std::max(k, cells[idx] + 1);
    }
  }
  for (std::size_t j = 0; j < n_cols; ++j) {
    if (categories[j] < 2) {
      throw InputError("item " + std::to_string(j + 1) +
                       " has fewer than 2 structural categories");
    }
  }

  CsvLoadResult result{ResponseMatrix(n_rows, std::move(categories), std::move(cells)), dropped,
                       std::move(names)};
  return result;
}

CsvLoadResult load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), options);
}

std::string to_csv(const ResponseMatrix& data, const std::vector<std::string>& column_names) {
  std::ostringstream out;
  if (!column_names.empty()) {
    for (std::size_t c = 0; c < column_names.size(); ++c)
      out << (c ? "," : "") << column_names[c];
    out << '\n';
  }
  for (int i = 0; i < data.n_persons(); ++i) {
    auto r = data.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << r[c];
    out << '\n';
  }
  return out.str();
}

void write_csv(const ResponseMatrix& data, const std::filesystem::path& path,
               const std::vector<std::string>& column_names) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << to_csv(data, column_names);
}

FrequencyTable summarize(const ResponseMatrix& data) {
  FrequencyTable table(static_cast<std::size_t>(data.n_items()));
  for (int j = 0; j < data.n_items(); ++j)
    table[static_cast<std::size_t>(j)].assign(static_cast<std::size_t>(data.categories(j)), 0);
  for (int i = 0; i < data.n_persons(); ++i) {
    auto r = data.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) ++table[j][static_cast<std::size_t>(r[j])];
  }
  return table;
}

}  // namespace irtvuong
