#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tailqr::io {

using CsvRow = std::vector<std::string>;

/// RFC-4180 reader: quoted fields, embedded commas/quotes/newlines, CRLF.
std::vector<CsvRow> read_csv(const std::filesystem::path& path);
std::vector<CsvRow> parse_csv(std::string_view text);

std::string csv_escape(std::string_view field);
std::string join_csv(const CsvRow& row);

/// Shortest decimal text that parses back to the same double ("nan" for NaN).
std::string format_double(double value);
/// Strict parse of a whole cell; empty or "NA"/"nan" cells give NaN, anything
/// else unparsable throws.
double parse_double(std::string_view cell);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Git blob object id (SHA-1 over "blob <size>\0<content>") as lowercase hex.
std::string git_blob_hash(std::string_view content);

}  // namespace tailqr::io
