#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fincheck/value.hpp"

namespace fincheck {

struct UnreadableError : std::runtime_error {
  explicit UnreadableError(const std::string& path)
      : std::runtime_error("unreadable: " + path), path(path) {}
  std::string path;
};

struct RaggedRowError : std::runtime_error {
  RaggedRowError(size_t line, size_t expected, size_t got)
      : std::runtime_error("ragged row at line " + std::to_string(line) + ": expected " +
                           std::to_string(expected) + " cells, got " + std::to_string(got)),
        line(line) {}
  size_t line;
};

struct TypeConflictError : std::runtime_error {
  TypeConflictError(const std::string& column, size_t line, const std::string& cell)
      : std::runtime_error("type conflict in column '" + column + "' at line " +
                           std::to_string(line) + ": \"" + cell + "\""),
        column(column),
        line(line) {}
  std::string column;
  size_t line;
};

/// Optional loader directives: forced column types and key designations.
struct SchemaHints {
  std::map<std::string, ValueType> column_types;
  std::optional<std::string> entity_key;
  std::optional<std::string> period_key;
};

/// Immutable typed table. Cells are TypedValue; Unknown marks Null.
class DataTable {
public:
  struct Column {
    std::string name;
    ValueType type;
  };

  DataTable() = default;
  DataTable(std::string name, std::vector<Column> columns, std::vector<std::vector<TypedValue>> rows)
      : name_(std::move(name)), columns_(std::move(columns)), rows_(std::move(rows)) {}

  const std::string& name() const { return name_; }
  const std::vector<Column>& columns() const { return columns_; }
  size_t row_count() const { return rows_.size(); }
  const std::vector<std::vector<TypedValue>>& rows() const { return rows_; }

  std::optional<size_t> column_index(std::string_view name) const {
    for (size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].name == name) return i;
    return std::nullopt;
  }

  const TypedValue& cell(size_t row, size_t col) const { return rows_[row][col]; }

  const std::optional<std::string>& entity_key() const { return entity_key_; }
  const std::optional<std::string>& period_key() const { return period_key_; }
  void set_keys(std::optional<std::string> entity, std::optional<std::string> period) {
    entity_key_ = std::move(entity);
    period_key_ = std::move(period);
  }

  friend bool operator==(const DataTable& a, const DataTable& b) {
    return a.columns_size_equal(b) && a.rows_ == b.rows_ && a.entity_key_ == b.entity_key_ &&
           a.period_key_ == b.period_key_;
  }

private:
  bool columns_size_equal(const DataTable& b) const {
    if (columns_.size() != b.columns_.size()) return false;
    for (size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].name != b.columns_[i].name || columns_[i].type != b.columns_[i].type)
        return false;
    return true;
  }

  std::string name_;
  std::vector<Column> columns_;
  std::vector<std::vector<TypedValue>> rows_;
  std::optional<std::string> entity_key_;
  std::optional<std::string> period_key_;
};

namespace csv {

/// RFC-4180 record reader: handles quoted cells, "" escapes, embedded
/// newlines, CRLF and LF endings. Records raw cell strings plus the
/// physical line each record starts on.
struct RawRecord {
  std::vector<std::string> cells;
  size_t line = 0;
};

inline std::vector<RawRecord> read_records(std::string_view text) {
  std::vector<RawRecord> records;
  size_t i = 0, line = 1;
  while (i < text.size()) {
    RawRecord rec;
    rec.line = line;
    std::string cell;
    bool in_quotes = false;
    bool done = false;
    while (!done) {
      if (i >= text.size()) {
        rec.cells.push_back(cell);
        break;
      }
      char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            cell += '"';
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          cell += c;
          ++i;
        }
      } else if (c == '"') {
        in_quotes = true;
        ++i;
      } else if (c == ',') {
        rec.cells.push_back(cell);
        cell.clear();
        ++i;
      } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
        rec.cells.push_back(cell);
        i += 2;
        ++line;
        done = true;
      } else if (c == '\n') {
        rec.cells.push_back(cell);
        ++i;
        ++line;
        done = true;
      } else {
        cell += c;
        ++i;
      }
    }
    records.push_back(std::move(rec));
  }
  // A lone trailing newline does not produce an empty record.
  if (!records.empty() && records.back().cells.size() == 1 && records.back().cells[0].empty())
    records.pop_back();
  return records;
}

inline bool needs_quoting(std::string_view cell) {
  return cell.find_first_of(",\"\n\r") != std::string_view::npos;
}

inline void write_cell(std::string& out, std::string_view cell) {
  if (!needs_quoting(cell)) {
    out += cell;
    return;
  }
  out += '"';
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

}  // namespace csv

namespace detail {

inline bool parse_bool_token(std::string_view s, bool& out) {
  if (s == "true") {
    out = true;
    return true;
  }
  if (s == "false") {
    out = false;
    return true;
  }
  return false;
}

inline std::optional<TypedValue> cell_as(ValueType t, const std::string& raw) {
  switch (t) {
    case ValueType::Boolean: {
      bool b;
      if (parse_bool_token(raw, b)) return TypedValue::boolean(b);
      return std::nullopt;
    }
    case ValueType::Number: {
      if (auto d = Decimal::parse(raw)) return TypedValue::number(*d);
      return std::nullopt;
    }
    case ValueType::Date: {
      if (auto d = Date::parse(raw)) return TypedValue::date(*d);
      return std::nullopt;
    }
    case ValueType::Text:
      return TypedValue::text(raw);
  }
  return std::nullopt;
}

}  // namespace detail

/// Parses CSV text (header row required) into a typed table. Inference
/// is deterministic: a column is Boolean if every non-empty cell is
/// true/false, else Number if every non-empty cell is a decimal, else
/// Date if every non-empty cell is YYYY-MM-DD, else Text. Empty cells
/// are Null. Hints force types; a violating cell raises TypeConflict.
inline DataTable table_from_csv(std::string_view text, const SchemaHints& hints = {},
                                std::string name = {}) {
  auto records = csv::read_records(text);
  if (records.empty()) throw UnreadableError("empty input (missing header row)");
  const auto& header = records[0].cells;
  const size_t width = header.size();

  for (size_t r = 1; r < records.size(); ++r)
    if (records[r].cells.size() != width)
      throw RaggedRowError(records[r].line, width, records[r].cells.size());

  std::vector<ValueType> types(width, ValueType::Text);
  for (size_t c = 0; c < width; ++c) {
    auto hint = hints.column_types.find(header[c]);
    if (hint != hints.column_types.end()) {
      types[c] = hint->second;
      for (size_t r = 1; r < records.size(); ++r) {
        const std::string& raw = records[r].cells[c];
        if (!raw.empty() && !detail::cell_as(types[c], raw))
          throw TypeConflictError(header[c], records[r].line, raw);
      }
      continue;
    }
    auto all = [&](ValueType t) {
      for (size_t r = 1; r < records.size(); ++r) {
        const std::string& raw = records[r].cells[c];
        if (!raw.empty() && !detail::cell_as(t, raw)) return false;
      }
      return true;
    };
    if (all(ValueType::Boolean))
      types[c] = ValueType::Boolean;
    else if (all(ValueType::Number))
      types[c] = ValueType::Number;
    else if (all(ValueType::Date))
      types[c] = ValueType::Date;
    else
      types[c] = ValueType::Text;
  }

  std::vector<DataTable::Column> columns;
  for (size_t c = 0; c < width; ++c) columns.push_back({header[c], types[c]});
  std::vector<std::vector<TypedValue>> rows;
  rows.reserve(records.size() - 1);
  for (size_t r = 1; r < records.size(); ++r) {
    std::vector<TypedValue> row;
    row.reserve(width);
    for (size_t c = 0; c < width; ++c) {
      const std::string& raw = records[r].cells[c];
      if (raw.empty())
        row.push_back(TypedValue::unknown());
      else
        row.push_back(*detail::cell_as(types[c], raw));
    }
    rows.push_back(std::move(row));
  }
  DataTable table(std::move(name), std::move(columns), std::move(rows));
  table.set_keys(hints.entity_key, hints.period_key);
  return table;
}

inline DataTable load_table(const std::string& path, const SchemaHints& hints = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnreadableError(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (auto dot = name.find_last_of('.'); dot != std::string::npos) name = name.substr(0, dot);
  return table_from_csv(buf.str(), hints, name);
}

/// Canonical writer: LF line endings, quoting only when necessary,
/// Null as empty cell, canonical value rendering, trailing newline.
inline std::string table_to_csv(const DataTable& table) {
  std::string out;
  const auto& cols = table.columns();
  for (size_t c = 0; c < cols.size(); ++c) {
    if (c) out += ',';
    csv::write_cell(out, cols[c].name);
  }
  out += '\n';
  for (const auto& row : table.rows()) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      if (!row[c].is_unknown()) csv::write_cell(out, row[c].to_display_string());
    }
    out += '\n';
  }
  return out;
}

inline void write_table(const DataTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UnreadableError(path);
  out << table_to_csv(table);
}

}  // namespace fincheck
