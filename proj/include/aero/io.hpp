#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace aero {

/// Warnings go to stderr unless a sink is installed (tests capture them).
using WarningSink = std::function<void(const std::string&)>;
void warn(const std::string& message);
WarningSink set_warning_sink(WarningSink sink);

/// Keeps freed memory inside the process. Training allocates and drops
/// tens of megabytes per window, and returning it to the kernel each time
/// costs more than the arithmetic. No-op outside glibc.
void tune_allocator();

namespace io {

/// Shortest representation that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view s);

std::vector<std::string> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
/// Appends one line, creating the file when needed.
void append_line(const std::filesystem::path& path, const std::string& line);

}  // namespace io
}  // namespace aero
