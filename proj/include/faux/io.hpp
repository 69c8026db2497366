#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace faux {

// Shortest decimal string that parses back to exactly the same double.
std::string double_to_string(double value);

// Strict double parse of a full token; throws ValidationError otherwise.
double parse_double(const std::string& token);

// Returns false (without throwing) if the token is not a full double.
bool try_parse_double(const std::string& token, double& out);

// RFC-4180-ish CSV: quoted fields, doubled quotes, \r tolerated. All rows
// must have the header's width; blank lines are skipped.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

// Whole-file read; throws ValidationError when unreadable.
std::string read_file(const std::filesystem::path& path);

// Atomic write: content goes to "<path>.tmp" first, then rename.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace faux
