#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ivhedge {

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

/// Parses a full field as a double; throws ConfigError mentioning `context` on failure.
double parse_double(std::string_view field, std::string_view context);

/// Splits one line on commas. Quoting is not supported; a trailing '\r' is dropped.
std::vector<std::string> split_csv_line(std::string_view line);

/// A comma-separated file with a header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  ///< 1-based source line of each row

    /// Column index of `name`, or -1.
    int column(std::string_view name) const;
};

/// Reads a CSV file, skipping blank lines. Throws ConfigError naming the path if it
/// cannot be opened, and naming the line if a row has the wrong number of fields.
CsvTable read_csv(const std::filesystem::path& file);

/// Opens `file` for binary writing (no newline translation); throws ConfigError on failure.
void write_text_file(const std::filesystem::path& file, const std::string& content);
std::string read_text_file(const std::filesystem::path& file);

}  // namespace ivhedge
