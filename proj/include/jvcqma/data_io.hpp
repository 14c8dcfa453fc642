#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "jvcqma/dataset.hpp"

namespace jvcqma::io {

enum class ColumnRole { Response, Continuous, Discrete };

struct ColumnSchema {
  std::string name;
  ColumnRole role = ColumnRole::Continuous;
  bool standardize = false;
};

using Schema = std::vector<ColumnSchema>;

/// Exactly one response, at least one continuous column, unique names.
void validate_schema(const Schema& schema);

/// JSON form: [{"name": ..., "role": "response|continuous|discrete",
/// "standardize": bool}, ...].
Schema schema_from_json(const nlohmann::json& doc);
nlohmann::ordered_json schema_to_json(const Schema& schema);
Schema load_schema(const std::filesystem::path& path);
void save_schema(const std::filesystem::path& path, const Schema& schema);

/// Schema for a dataset: response first, then covariates by role.
Schema schema_for(const Dataset& data, bool standardize_continuous = false);

/// Reads a comma-separated file with a header row. Covariates are ordered as
/// in the schema; columns not named in the schema are ignored.
Dataset load_csv(const std::filesystem::path& path, const Schema& schema);

/// Writes the response followed by the covariates. Values use the shortest
/// representation that parses back to the same double.
void save_csv(const std::filesystem::path& path, const Dataset& data);

/// Covariate matrix of a query file, columns ordered like `data`'s
/// covariates. The response column may be absent.
Eigen::MatrixXd load_queries(const std::filesystem::path& path, const Dataset& data);

std::string format_double(double value);

/// Per-column training statistics used to standardize covariates.
struct StandardizationRecord {
  std::vector<int> cols;
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> sd;
};

/// Standardizes the covariates flagged in the schema to mean 0 and
/// (divisor-n) variance 1. Throws DataError on a constant column.
std::pair<Dataset, StandardizationRecord> standardize(const Dataset& data, const Schema& schema);

Dataset apply_standardization(const Dataset& data, const StandardizationRecord& record);
Eigen::MatrixXd apply_standardization(const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                                      const StandardizationRecord& record);
Eigen::MatrixXd undo_standardization(const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                                     const StandardizationRecord& record);

nlohmann::ordered_json record_to_json(const StandardizationRecord& record);
StandardizationRecord record_from_json(const nlohmann::json& doc);

}  // namespace jvcqma::io
