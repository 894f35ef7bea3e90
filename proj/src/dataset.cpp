#include "stackcast/dataset.hpp"

#include "stackcast/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stackcast {

const char* to_string(Family family) noexcept {
  return family == Family::linear ? "linear" : "logistic";
}

Family family_from_string(std::string_view name) {
  if (name == "linear") return Family::linear;
  if (name == "logistic") return Family::logistic;
  fail(ErrorCode::invalid_argument, "unknown family '" + std::string(name) + "'");
}

bool is_binary(const VectorXd& y) {
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) return false;
  }
  return true;
}

void Dataset::validate() const {
  require(x.rows() >= 1 && x.cols() >= 1, "dataset needs at least one row and one column");
  require(y.size() == x.rows(), "outcome length " + std::to_string(y.size()) +
                                    " does not match " + std::to_string(x.rows()) + " rows");
  require(x.allFinite() && y.allFinite(), "dataset contains non-finite values");
  if (truth) require(truth->size() == x.rows(), "truth length does not match row count");
  if (!covariate_names.empty()) {
    require(static_cast<Index>(covariate_names.size()) == x.cols(),
            "covariate name count does not match column count");
  }
  if (family == Family::logistic) {
    require(is_binary(y), "logistic dataset outcomes must be 0 or 1");
    if (truth) {
      for (Index i = 0; i < truth->size(); ++i) {
        require((*truth)[i] > 0.0 && (*truth)[i] < 1.0,
                "logistic truth must lie strictly inside (0, 1)");
      }
    }
  }
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  out.family = family;
  out.covariate_names = covariate_names;
  out.x.resize(static_cast<Index>(rows.size()), x.cols());
  out.y.resize(static_cast<Index>(rows.size()));
  if (truth) out.truth = VectorXd(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Index>(r);
    out.x.row(i) = x.row(rows[r]);
    out.y[i] = y[rows[r]];
    if (truth) (*out.truth)[i] = (*truth)[rows[r]];
  }
  return out;
}

Index CsvTable::column_index(std::string_view name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return static_cast<Index>(j);
  }
  fail(ErrorCode::invalid_argument, "no column named '" + std::string(name) + "'");
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

CsvTable parse_csv_table(std::string_view text, std::string_view source) {
  const std::string where(source);
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  if (lines.empty()) fail(ErrorCode::parse, where + ": empty CSV file");

  CsvTable table;
  for (auto field : split_fields(lines.front())) {
    field = trim(field);
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
      field = field.substr(1, field.size() - 2);
    }
    table.header.emplace_back(field);
  }
  const auto cols = static_cast<Index>(table.header.size());
  if (lines.size() < 2) fail(ErrorCode::parse, where + ": CSV has a header but no data rows");

  table.values.resize(static_cast<Index>(lines.size() - 1), cols);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    if (static_cast<Index>(fields.size()) != cols) {
      fail(ErrorCode::parse, where + ":" + std::to_string(r + 1) + ": expected " +
                                 std::to_string(cols) + " fields, found " +
                                 std::to_string(fields.size()));
    }
    for (Index c = 0; c < cols; ++c) {
      const std::string_view cell = trim(fields[static_cast<std::size_t>(c)]);
      double value = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, value);
      if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
        fail(ErrorCode::parse, where + ":" + std::to_string(r + 1) + ": column '" +
                                   table.header[static_cast<std::size_t>(c)] +
                                   "': non-numeric cell '" + std::string(cell) + "'");
      }
      table.values(static_cast<Index>(r - 1), c) = value;
    }
  }
  return table;
}

CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv_table(buffer.str(), path.string());
}

Dataset dataset_from_table(const CsvTable& table, std::string_view outcome_column) {
  const Index outcome = table.column_index(outcome_column);
  require(table.values.cols() >= 2, "CSV needs at least one covariate column besides the outcome");

  Dataset data;
  data.y = table.values.col(outcome);
  data.x.resize(table.values.rows(), table.values.cols() - 1);
  Index j = 0;
  for (Index c = 0; c < table.values.cols(); ++c) {
    if (c == outcome) continue;
    data.x.col(j++) = table.values.col(c);
    data.covariate_names.push_back(table.header[static_cast<std::size_t>(c)]);
  }
  data.family = is_binary(data.y) ? Family::logistic : Family::linear;
  data.validate();
  return data;
}

Dataset load_csv(const std::filesystem::path& path, std::string_view outcome_column) {
  return dataset_from_table(read_csv_table(path), outcome_column);
}

MatrixXd select_columns(const CsvTable& table, const std::vector<std::string>& names) {
  MatrixXd out(table.values.rows(), static_cast<Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    out.col(static_cast<Index>(j)) = table.values.col(table.column_index(names[j]));
  }
  return out;
}

}  // namespace stackcast
