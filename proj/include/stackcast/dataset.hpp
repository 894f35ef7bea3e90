#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stackcast {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Outcome family: Gaussian outcomes with linear candidates, or binary
/// outcomes with logistic candidates.
enum class Family { linear, logistic };

const char* to_string(Family family) noexcept;
Family family_from_string(std::string_view name);

/// Covariates, outcome and (for simulated data) the true conditional mean or
/// success probability of each row.
struct Dataset {
  MatrixXd x;
  VectorXd y;
  std::optional<VectorXd> truth;
  Family family = Family::linear;
  std::vector<std::string> covariate_names;

  Index rows() const { return x.rows(); }
  Index cols() const { return x.cols(); }

  /// Throws on shape mismatches or non-binary outcomes in a logistic dataset.
  void validate() const;

  /// Copy restricted to the given rows, in the given order.
  Dataset subset(const std::vector<Index>& rows) const;
};

/// Header plus a dense numeric body, as read from a CSV file.
struct CsvTable {
  std::vector<std::string> header;
  MatrixXd values;

  Index column_index(std::string_view name) const;
};

CsvTable read_csv_table(const std::filesystem::path& path);
CsvTable parse_csv_table(std::string_view text, std::string_view source = "<memory>");

/// Loads a dataset; every column other than `outcome_column` is a covariate.
/// Outcomes made only of 0 and 1 mark the dataset as logistic.
Dataset load_csv(const std::filesystem::path& path, std::string_view outcome_column);
Dataset dataset_from_table(const CsvTable& table, std::string_view outcome_column);

/// Extracts the named columns, in order, from a table.
MatrixXd select_columns(const CsvTable& table, const std::vector<std::string>& names);

bool is_binary(const VectorXd& y);

}  // namespace stackcast
