#include "approxsense/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "approxsense/error.hpp"

namespace approxsense::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& field, const std::string& origin, std::size_t line,
                    std::size_t column) {
  const std::string text = trim(field);
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kIngestion, origin + ":" + std::to_string(line) + ": column " +
                                          std::to_string(column + 1) + ": cannot parse '" +
                                          text + "' as a number");
  }
  return value;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }
  return std::string(buf, ptr);
}

Table parse_table(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  Table table;
  std::size_t line_no = 0;
  // Skip a UTF-8 byte-order mark and leading blank lines.
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw Error(ErrorCode::kIngestion, origin + ": missing header row");
  for (auto& name : split_line(line)) table.header.push_back(trim(name));

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != table.header.size()) {
      throw Error(ErrorCode::kIngestion, origin + ":" + std::to_string(line_no) + ": expected " +
                                            std::to_string(table.header.size()) +
                                            " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) row[c] = parse_number(fields[c], origin, line_no, c);
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIngestion, "cannot open CSV file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_table(buffer.str(), path.string());
}

std::string format_table(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c) out += ',';
    out += table.header[c];
  }
  out += '\n';
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(table.values(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_table(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIngestion, "cannot write CSV file '" + path.string() + "'");
  out << format_table(table);
}

namespace {

std::vector<std::string> feature_header(Eigen::Index d) {
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < d; ++j) header.push_back("x" + std::to_string(j));
  return header;
}

}  // namespace

LabelledSample read_labelled(const std::filesystem::path& path) {
  Table t = read_table(path);
  if (t.header.empty() || t.header.back() != "target") {
    throw Error(ErrorCode::kIngestion,
                path.string() + ": labelled CSV needs a final column named 'target'");
  }
  if (t.header.size() < 2) throw Error(ErrorCode::kIngestion, path.string() + ": no feature columns");
  if (t.values.rows() == 0) throw Error(ErrorCode::kIngestion, path.string() + ": no data rows");
  const Eigen::Index d = t.values.cols() - 1;
  return LabelledSample(t.values.leftCols(d), t.values.col(d), path.string());
}

UnlabelledSample read_unlabelled(const std::filesystem::path& path) {
  Table t = read_table(path);
  if (t.values.rows() == 0) throw Error(ErrorCode::kIngestion, path.string() + ": no data rows");
  if (!t.header.empty() && t.header.back() == "target") {
    // Labels are ignored when a labelled file is used as unlabelled data.
    return UnlabelledSample(t.values.leftCols(t.values.cols() - 1), path.string());
  }
  return UnlabelledSample(t.values, path.string());
}

void write_labelled(const std::filesystem::path& path, const LabelledSample& sample) {
  Table t;
  t.header = feature_header(sample.inputs.cols());
  t.header.emplace_back("target");
  t.values.resize(sample.inputs.rows(), sample.inputs.cols() + 1);
  t.values << sample.inputs, sample.targets;
  write_table(path, t);
}

void write_unlabelled(const std::filesystem::path& path, const UnlabelledSample& sample) {
  Table t;
  t.header = feature_header(sample.inputs.cols());
  t.values = sample.inputs;
  write_table(path, t);
}

}  // namespace approxsense::csv
