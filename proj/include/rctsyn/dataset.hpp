#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rctsyn/schema.hpp"

namespace rctsyn {

/// Storage for one column: doubles for continuous columns, level indices for
/// discrete ones.
using ColumnValues = std::variant<std::vector<double>, std::vector<std::int32_t>>;

namespace detail {

inline std::size_t column_size(const ColumnValues &c) {
  return std::visit([](const auto &v) { return v.size(); }, c);
}

/// Numeric encoding used whenever a discrete column enters a regression or a
/// summary statistic: if every declared level parses as a number, the parsed
/// values are used; otherwise levels are coded 0,1,... in declared order.
inline std::vector<double> numeric_levels(const ColumnSpec &col) {
  std::vector<double> out(col.levels.size());
  bool all_numeric = true;
  for (std::size_t i = 0; i < col.levels.size(); ++i) {
    const std::string &s = col.levels[i];
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      all_numeric = false;
      break;
    }
    out[i] = v;
  }
  if (!all_numeric) {
    for (std::size_t i = 0; i < col.levels.size(); ++i) {
      out[i] = static_cast<double>(i);
    }
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// A rectangular study frame tied to its schema. Columns are stored in schema
/// order; rows are aligned across columns.
struct Dataset {
  Schema schema;
  std::vector<ColumnValues> columns;

  std::size_t n_rows() const {
    return columns.empty() ? 0 : detail::column_size(columns[0]);
  }

  std::vector<double> &real(std::size_t col) {
    return std::get<std::vector<double>>(columns[col]);
  }
  const std::vector<double> &real(std::size_t col) const {
    return std::get<std::vector<double>>(columns[col]);
  }
  std::vector<std::int32_t> &levels(std::size_t col) {
    return std::get<std::vector<std::int32_t>>(columns[col]);
  }
  const std::vector<std::int32_t> &levels(std::size_t col) const {
    return std::get<std::vector<std::int32_t>>(columns[col]);
  }

  /// Regression/statistic value of cell (col, row); see numeric_levels.
  double numeric_value(std::size_t col, std::size_t row) const {
    const ColumnSpec &spec = schema.columns[col];
    if (spec.kind == Kind::continuous) return real(col)[row];
    const auto table = detail::numeric_levels(spec);
    return table[static_cast<std::size_t>(levels(col)[row])];
  }

  /// Arm of a row: 0 for control, k for the k-th declared treatment column.
  /// Assumes mutual exclusivity, which load_dataset enforces.
  int arm_of(const std::vector<std::size_t> &treat_cols, std::size_t row) const {
    for (std::size_t k = 0; k < treat_cols.size(); ++k) {
      if (levels(treat_cols[k])[row] == 1) return static_cast<int>(k) + 1;
    }
    return 0;
  }

  static Dataset empty_like(const Schema &schema, std::size_t n) {
    Dataset d;
    d.schema = schema;
    d.columns.reserve(schema.columns.size());
    for (const auto &c : schema.columns) {
      if (c.kind == Kind::continuous) {
        d.columns.emplace_back(std::vector<double>(n, 0.0));
      } else {
        d.columns.emplace_back(std::vector<std::int32_t>(n, 0));
      }
    }
    return d;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  out.push_back(field);
  return out;
}

}  // namespace detail

/// Reads a comma-separated frame with a header row. Columns may appear in any
/// order but must match the schema exactly (no extras, none missing). Every
/// cell must parse; missing values are rejected. When `dp_mode` is set,
/// continuous values must respect any finite declared bound, since in a
/// private release the declared support is the public contract.
inline Dataset load_dataset(std::istream &in, const Schema &schema, bool dp_mode) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("data file is empty");
  const auto header = detail::split_csv_line(line);
  std::vector<int> field_of_column(schema.n_columns(), -1);
  for (std::size_t f = 0; f < header.size(); ++f) {
    const int c = schema.find(header[f]);
    if (c < 0) throw ValidationError("data header has unknown column '" + header[f] + "'");
    if (field_of_column[static_cast<std::size_t>(c)] >= 0) {
      throw ValidationError("data header repeats column '" + header[f] + "'");
    }
    field_of_column[static_cast<std::size_t>(c)] = static_cast<int>(f);
  }
  for (std::size_t c = 0; c < schema.n_columns(); ++c) {
    if (field_of_column[c] < 0) {
      throw ValidationError("data header missing column '" + schema.columns[c].name + "'");
    }
  }

  Dataset d = Dataset::empty_like(schema, 0);
  const auto treat_cols = schema.treatment_indices();
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    ++row;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < schema.n_columns(); ++c) {
      const ColumnSpec &spec = schema.columns[c];
      const std::string &cell = fields[static_cast<std::size_t>(field_of_column[c])];
      const std::string where =
          "row " + std::to_string(row) + ", column '" + spec.name + "'";
      if (cell.empty()) throw ValidationError(where + ": missing value");
      if (spec.kind == Kind::continuous) {
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
          throw ValidationError(where + ": cannot parse '" + cell + "' as a number");
        }
        if (dp_mode &&
            ((std::isfinite(spec.lower) && v < spec.lower) ||
             (std::isfinite(spec.upper) && v > spec.upper))) {
          throw ValidationError(where + ": value " + cell +
                                " outside declared bounds [" +
                                detail::format_double(spec.lower) + ", " +
                                detail::format_double(spec.upper) + "]");
        }
        d.real(c).push_back(v);
      } else {
        const int idx = spec.level_index(cell);
        if (idx < 0) {
          throw ValidationError(where + ": undeclared level '" + cell + "'");
        }
        d.levels(c).push_back(idx);
      }
    }
    // Treatment dummies are mutually exclusive arm indicators.
    int set_count = 0;
    std::string set_names;
    for (std::size_t t : treat_cols) {
      if (d.levels(t).back() == 1) {
        ++set_count;
        if (!set_names.empty()) set_names += " and ";
        set_names += schema.columns[t].name;
      }
    }
    if (set_count > 1) {
      throw ValidationError("row " + std::to_string(row) +
                            ": mutually exclusive treatment indicators both set (" +
                            set_names + ")");
    }
  }
  if (d.n_rows() == 0) throw ValidationError("data file has a header but no rows");
  return d;
}

inline Dataset load_dataset_file(const std::string &path, const Schema &schema,
                                 bool dp_mode) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file '" + path + "'");
  return load_dataset(in, schema, dp_mode);
}

/// Writes the frame in schema column order. Doubles are emitted with
/// std::to_chars shortest round-trip formatting, so written values reload
/// bit-identically.
inline void write_csv(const Dataset &d, std::ostream &out) {
  for (std::size_t c = 0; c < d.schema.n_columns(); ++c) {
    if (c) out << ',';
    out << d.schema.columns[c].name;
  }
  out << '\n';
  const std::size_t n = d.n_rows();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d.schema.n_columns(); ++c) {
      if (c) out << ',';
      const ColumnSpec &spec = d.schema.columns[c];
      if (spec.kind == Kind::continuous) {
        out << detail::format_double(d.real(c)[r]);
      } else {
        out << spec.levels[static_cast<std::size_t>(d.levels(c)[r])];
      }
    }
    out << '\n';
  }
}

inline void write_csv_file(const Dataset &d, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  write_csv(d, out);
}

}  // namespace rctsyn
