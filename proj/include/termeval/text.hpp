#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace termeval {

/// Split on '\n'. A trailing newline does not produce an extra empty line,
/// so "a\nb\n" and "a\nb" both have two lines; "" has none.
std::vector<std::string_view> split_lines(std::string_view text);

/// Prefix line k (1-based) with "k: ". Line terminators are preserved.
std::string number_lines(std::string_view source);

/// Inverse of number_lines. When some line lacks its expected "k: " prefix
/// the input is returned unchanged and `*ok` is set to false.
std::string strip_line_numbers(std::string_view numbered, bool* ok = nullptr);

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::string& path);
/// Write via a temporary sibling and rename, so readers never see a torn file.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace termeval
