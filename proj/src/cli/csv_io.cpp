#include "heavycomb/cli/csv_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <json.hpp>

#include "heavycomb/errors.hpp"

namespace heavycomb::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

bool parse_double(std::string_view text, double& value) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

bool GroupReader::next(PValueRecord& record) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    double probe = 0.0;
    if (first_) {
      first_ = false;
      if (fields.size() >= 2 && !parse_double(fields[1], probe)) {
        header_.assign(fields.begin(), fields.end());
        continue;
      }
    }
    const std::string where = "line " + std::to_string(line_no_);
    if (fields[0].empty()) fail(ErrorCode::validation, where + ": missing group_id");
    std::vector<double> values;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i].empty() && i + 1 == fields.size()) break;
      double v = 0.0;
      if (!parse_double(fields[i], v)) {
        fail(ErrorCode::validation, where + ": malformed p-value '" + std::string(fields[i]) + "'");
      }
      if (std::isnan(v) || !(v > 0 && v <= 1)) {
        fail(ErrorCode::validation, where + ": p-value " + std::string(fields[i]) + " outside (0, 1]");
      }
      values.push_back(v);
    }
    if (values.empty()) {
      fail(ErrorCode::validation, where + ": group '" + std::string(fields[0]) + "' has no p-values");
    }
    record.group_id = std::string(fields[0]);
    record.p_values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    record.line = line_no_;
    return true;
  }
  return false;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

TableWriter::TableWriter(std::ostream& out, Format format, std::vector<std::string> columns)
    : out_(out), format_(format), columns_(std::move(columns)) {
  if (format_ == Format::csv) {
    for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << csv_escape(columns_[i]);
    out_ << '\n';
  } else {
    out_ << "[";
  }
}

TableWriter::~TableWriter() {
  if (!finished_) {
    try {
      finish();
    } catch (...) {
    }
  }
}

void TableWriter::row(const std::vector<Cell>& cells) {
  if (cells.size() != columns_.size()) fail(ErrorCode::validation, "row width does not match header");
  if (format_ == Format::csv) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) out_ << csv_escape(v);
            else if constexpr (std::is_same_v<T, double>) out_ << format_double(v);
            else if constexpr (std::is_same_v<T, bool>) out_ << (v ? "true" : "false");
            else out_ << v;
          },
          cells[i]);
    }
    out_ << '\n';
  } else {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              if (std::isfinite(v)) obj[columns_[i]] = v;
              else obj[columns_[i]] = format_double(v);
            } else {
              obj[columns_[i]] = v;
            }
          },
          cells[i]);
    }
    out_ << (rows_ ? ",\n " : "\n ") << obj.dump();
  }
  ++rows_;
}

void TableWriter::finish() {
  if (finished_) return;
  finished_ = true;
  if (format_ == Format::json) out_ << (rows_ ? "\n]\n" : "]\n");
  out_.flush();
}

}  // namespace heavycomb::cli
