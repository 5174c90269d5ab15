#pragma once

#include <string>
#include <vector>

namespace headlab {

/// Formats with 9 significant digits (the manifest/report convention).
std::string format_g9(double v);

/// Rounds a double to the value obtained by printing with %.9g and re-parsing.
/// Values produced this way survive manifest round-trips bit-exactly.
double quantize_g9(double v);

std::vector<std::string> split_tabs(const std::string& line);
std::string join_tabs(const std::vector<std::string>& fields);

std::vector<std::string> read_lines(const std::string& path);
void write_text(const std::string& path, const std::string& content);
void append_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

bool file_exists(const std::string& path);

}  // namespace headlab
