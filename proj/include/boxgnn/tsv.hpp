#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace boxgnn::tsv {

std::vector<std::string_view> split(std::string_view line, char sep = '\t');

/// Calls f(line_number, line) for every non-blank line not starting with '#'.
/// Trailing '\r' is stripped.
void for_each_record(std::string_view text,
                     const std::function<void(std::size_t, std::string_view)>& f);

/// Strict decimal parse; throws DataError mentioning `what` on failure.
double parse_double(std::string_view s, const std::string& what);
long long parse_int(std::string_view s, const std::string& what);

/// Shortest exact form with 17 significant digits ("%.17g").
std::string format_double(double v);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::string_view content);

}  // namespace boxgnn::tsv
