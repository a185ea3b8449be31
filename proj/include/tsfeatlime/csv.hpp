#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tsfl::csv {

/// A parsed CSV document: the header row plus data rows, all as raw text.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of `name` in the header; throws ConfigError when absent.
    [[nodiscard]] std::size_t column(std::string_view name) const;
};

/// RFC-4180 parser: quoted fields, doubled quotes, CRLF or LF line endings.
/// A header row is required. Blank trailing lines are ignored.
Table parse(std::string_view text);

Table read_file(const std::string& path);

/// Quotes a field when it contains a delimiter, quote or line break.
std::string escape(std::string_view field);

}  // namespace tsfl::csv
