#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace polysketch::csv {

using Row = std::vector<std::string>;

// RFC-4180 parsing: quoted fields, doubled quotes, CRLF or LF line ends.
std::vector<Row> parse(std::string_view text);
std::vector<Row> read_file(const std::filesystem::path& file);

// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
void write_row(std::ostream& out, std::span<const std::string> fields);

// Shortest text that reads back as the same double ("%.17g" fallback).
std::string format_double(double value);
// Fixed significant digits, "%.<digits>g".
std::string format_double(double value, int digits);

}  // namespace polysketch::csv
