#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "approxsense/model.hpp"

namespace approxsense::csv {

// Plain numeric table: header row, comma separated, '.' decimal point.
struct Table {
  std::vector<std::string> header;
  Matrix values;
};

Table read_table(const std::filesystem::path& path);
Table parse_table(const std::string& text, const std::string& origin);
void write_table(const std::filesystem::path& path, const Table& table);
std::string format_table(const Table& table);

// A final column named `target` marks a labelled sample.
LabelledSample read_labelled(const std::filesystem::path& path);
UnlabelledSample read_unlabelled(const std::filesystem::path& path);

void write_labelled(const std::filesystem::path& path, const LabelledSample& sample);
void write_unlabelled(const std::filesystem::path& path, const UnlabelledSample& sample);

// Shortest decimal that round-trips, never fewer than needed for 17
// significant digits of precision.
std::string format_double(double v);

}  // namespace approxsense::csv
