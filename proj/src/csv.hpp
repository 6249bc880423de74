#pragma once

// Minimal comma-separated reader/writer for the workbench's flat schemas.
// Fields never contain commas or quotes, so no quoting rules are needed.

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ktrace::csv {

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    // Next non-blank line split on commas, with a trailing '\r' removed.
    // Returns false at end of input.
    bool next(std::vector<std::string>& fields);

    // 1-based index of the line most recently returned (header is line 1).
    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::string buffer_;
    std::size_t line_ = 0;
};

std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);

// Shortest representation that round-trips through parse_double.
std::string format_double(double value);

}  // namespace ktrace::csv
