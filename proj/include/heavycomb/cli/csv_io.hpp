#pragma once

// Group-per-line p-value input and tabular CSV/JSON output for the CLI.

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace heavycomb::cli {

struct PValueRecord {
  std::string group_id;
  Eigen::VectorXd p_values;
  std::int64_t line = 0;
};

std::vector<std::string_view> split_fields(std::string_view line);
bool parse_double(std::string_view text, double& value);

/// Reads `group_id,p1,p2,...` lines one group at a time. The first non-blank
/// line is a header when its second field is not numeric. Blank lines are
/// skipped; malformed rows and p-values outside (0, 1] throw validation
/// errors naming the line.
class GroupReader {
 public:
  explicit GroupReader(std::istream& in) : in_(in) {}
  bool next(PValueRecord& record);
  const std::vector<std::string>& header() const { return header_; }

 private:
  std::istream& in_;
  std::int64_t line_no_ = 0;
  bool first_ = true;
  std::vector<std::string> header_;
};

/// Shortest text with 17 significant digits, so values reparse exactly.
std::string format_double(double v);

enum class Format { csv, json };

using Cell = std::variant<std::string, double, std::int64_t, bool>;

/// Streams rows as CSV (header + lines) or as a JSON array of objects.
class TableWriter {
 public:
  TableWriter(std::ostream& out, Format format, std::vector<std::string> columns);
  ~TableWriter();
  TableWriter(const TableWriter&) = delete;
  TableWriter& operator=(const TableWriter&) = delete;

  void row(const std::vector<Cell>& cells);
  void finish();

 private:
  std::ostream& out_;
  Format format_;
  std::vector<std::string> columns_;
  std::int64_t rows_ = 0;
  bool finished_ = false;
};

}  // namespace heavycomb::cli
