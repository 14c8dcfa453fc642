#include "jvcqma/data_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "jvcqma/errors.hpp"

namespace jvcqma::io {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::string_view role_name(ColumnRole role) {
  switch (role) {
    case ColumnRole::Response:
      return "response";
    case ColumnRole::Continuous:
      return "continuous";
    case ColumnRole::Discrete:
      return "discrete";
  }
  return "continuous";
}

ColumnRole parse_role(const std::string& text) {
  if (text == "response") return ColumnRole::Response;
  if (text == "continuous") return ColumnRole::Continuous;
  if (text == "discrete") return ColumnRole::Discrete;
  throw DataError("unknown column role '" + text + "'");
}

// Parsed CSV: header names and row-major numeric cells for the requested
// columns.
struct Table {
  std::vector<std::vector<double>> rows;
};

Table read_columns(const std::filesystem::path& path, const std::vector<std::string>& wanted,
                   const std::vector<bool>& optional) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw DataError(path.string() + ": empty file (a header row is required)");
  }
  std::unordered_map<std::string, std::size_t> header;
  const auto names = split(line);
  for (std::size_t c = 0; c < names.size(); ++c) header.emplace(unquote(names[c]), c);

  std::vector<long> source(wanted.size(), -1);
  for (std::size_t k = 0; k < wanted.size(); ++k) {
    const auto it = header.find(wanted[k]);
    if (it != header.end()) {
      source[k] = static_cast<long>(it->second);
    } else if (!optional[k]) {
      throw DataError(path.string() + ": missing column '" + wanted[k] + "'");
    }
  }

  Table table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != names.size()) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " fields, header has " +
                      std::to_string(names.size()));
    }
    std::vector<double> values(wanted.size(), 0.0);
    for (std::size_t k = 0; k < wanted.size(); ++k) {
      if (source[k] < 0) continue;
      const std::string_view cell = cells[static_cast<std::size_t>(source[k])];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw DataError(path.string() + ": row " + std::to_string(table.rows.size() + 1) +
                        " (line " + std::to_string(line_no) + "), column '" + wanted[k] +
                        "': non-numeric value '" + std::string(cell) + "'");
      }
      values[k] = v;
    }
    table.rows.push_back(std::move(values));
  }
  return table;
}

}  // namespace

void validate_schema(const Schema& schema) {
  int responses = 0;
  int continuous = 0;
  std::set<std::string> names;
  for (const auto& col : schema) {
    if (col.name.empty()) throw DataError("schema: empty column name");
    if (!names.insert(col.name).second) throw DataError("schema: duplicate column '" + col.name + "'");
    responses += col.role == ColumnRole::Response;
    continuous += col.role == ColumnRole::Continuous;
  }
  if (responses != 1) throw DataError("schema must name exactly one response column");
  if (continuous < 1) throw DataError("schema must name at least one continuous column");
}

Schema schema_from_json(const nlohmann::json& doc) {
  Schema schema;
  try {
    for (const auto& entry : doc) {
      ColumnSchema col;
      col.name = entry.at("name").get<std::string>();
      col.role = parse_role(entry.at("role").get<std::string>());
      col.standardize = entry.value("standardize", false);
      schema.push_back(std::move(col));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed schema: ") + e.what());
  }
  validate_schema(schema);
  return schema;
}

nlohmann::ordered_json schema_to_json(const Schema& schema) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& col : schema) {
    doc.push_back({{"name", col.name}, {"role", role_name(col.role)}, {"standardize", col.standardize}});
  }
  return doc;
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema " + path.string());
  try {
    return schema_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("schema " + path.string() + ": " + e.what());
  }
}

void save_schema(const std::filesystem::path& path, const Schema& schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << schema_to_json(schema).dump(2) << '\n';
}

Schema schema_for(const Dataset& data, bool standardize_continuous) {
  Schema schema{{data.response_name, ColumnRole::Response, false}};
  for (int c = 0; c < data.dims(); ++c) {
    const bool cont = data.is_continuous(c);
    schema.push_back({data.column_names.at(static_cast<std::size_t>(c)),
                      cont ? ColumnRole::Continuous : ColumnRole::Discrete,
                      cont && standardize_continuous});
  }
  return schema;
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  validate_schema(schema);
  std::vector<std::string> wanted;
  for (const auto& col : schema) wanted.push_back(col.name);
  const Table table = read_columns(path, wanted, std::vector<bool>(wanted.size(), false));

  Dataset data;
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto dims = static_cast<Eigen::Index>(schema.size() - 1);
  data.y.resize(n);
  data.x.resize(n, dims);
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < schema.size(); ++k) {
    const auto& spec = schema[k];
    if (spec.role == ColumnRole::Response) {
      data.response_name = spec.name;
      for (Eigen::Index i = 0; i < n; ++i) data.y[i] = table.rows[static_cast<std::size_t>(i)][k];
      continue;
    }
    for (Eigen::Index i = 0; i < n; ++i) data.x(i, col) = table.rows[static_cast<std::size_t>(i)][k];
    (spec.role == ColumnRole::Continuous ? data.continuous_cols : data.discrete_cols)
        .push_back(static_cast<int>(col));
    data.column_names.push_back(spec.name);
    ++col;
  }
  data.validate();
  return data;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw InternalError("number formatting failed");
  return std::string(buf, ptr);
}

void save_csv(const std::filesystem::path& path, const Dataset& data) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  std::string text = data.response_name;
  for (const auto& name : data.column_names) text += "," + name;
  text += '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    text += format_double(data.y[i]);
    for (Eigen::Index c = 0; c < data.dims(); ++c) text += "," + format_double(data.x(i, c));
    text += '\n';
  }
  out << text;
}

Eigen::MatrixXd load_queries(const std::filesystem::path& path, const Dataset& data) {
  const Table table =
      read_columns(path, data.column_names, std::vector<bool>(data.column_names.size(), false));
  Eigen::MatrixXd q(static_cast<Eigen::Index>(table.rows.size()), data.dims());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
      q(i, c) = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    }
  }
  return q;
}

std::pair<Dataset, StandardizationRecord> standardize(const Dataset& data, const Schema& schema) {
  data.validate();
  StandardizationRecord record;
  for (const auto& spec : schema) {
    if (!spec.standardize || spec.role == ColumnRole::Response) continue;
    int col = -1;
    for (int c = 0; c < data.dims(); ++c) {
      if (data.column_names[static_cast<std::size_t>(c)] == spec.name) col = c;
    }
    if (col < 0) throw DataError("standardize: dataset has no column '" + spec.name + "'");
    const auto x = data.x.col(col);
    const double n = static_cast<double>(x.size());
    const double mean = x.mean();
    const double sd = std::sqrt((x.array() - mean).square().sum() / n);
    if (!(sd > 0.0)) throw DataError("standardize: column '" + spec.name + "' has zero variance");
    record.cols.push_back(col);
    record.names.push_back(spec.name);
    record.mean.push_back(mean);
    record.sd.push_back(sd);
  }
  return {apply_standardization(data, record), record};
}

Eigen::MatrixXd apply_standardization(const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                                      const StandardizationRecord& record) {
  Eigen::MatrixXd out = covariates;
  for (std::size_t k = 0; k < record.cols.size(); ++k) {
    const int c = record.cols[k];
    if (c < 0 || c >= out.cols()) throw ShapeError("standardization record does not match columns");
    out.col(c) = (out.col(c).array() - record.mean[k]) / record.sd[k];
  }
  return out;
}

Dataset apply_standardization(const Dataset& data, const StandardizationRecord& record) {
  for (std::size_t k = 0; k < record.cols.size(); ++k) {
    const int c = record.cols[k];
    if (c < 0 || c >= data.dims() ||
        (!data.column_names.empty() && data.column_names[static_cast<std::size_t>(c)] != record.names[k])) {
      throw ShapeError("standardization record does not match dataset columns");
    }
  }
  Dataset out = data;
  out.x = apply_standardization(data.x, record);
  return out;
}

Eigen::MatrixXd undo_standardization(const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                                     const StandardizationRecord& record) {
  Eigen::MatrixXd out = covariates;
  for (std::size_t k = 0; k < record.cols.size(); ++k) {
    const int c = record.cols[k];
    out.col(c) = out.col(c).array() * record.sd[k] + record.mean[k];
  }
  return out;
}

nlohmann::ordered_json record_to_json(const StandardizationRecord& record) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < record.cols.size(); ++k) {
    doc.push_back({{"column", record.cols[k]},
                   {"name", record.names[k]},
                   {"mean", record.mean[k]},
                   {"sd", record.sd[k]}});
  }
  return doc;
}

StandardizationRecord record_from_json(const nlohmann::json& doc) {
  StandardizationRecord record;
  try {
    for (const auto& e : doc) {
      record.cols.push_back(e.at("column").get<int>());
      record.names.push_back(e.at("name").get<std::string>());
      record.mean.push_back(e.at("mean").get<double>());
      record.sd.push_back(e.at("sd").get<double>());
      if (!(record.sd.back() > 0.0)) throw DataError("standardization sd must be positive");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed standardization record: ") + e.what());
  }
  return record;
}

}  // namespace jvcqma::io
