#include "csv.hpp"

#include <array>
#include <charconv>

namespace ktrace::csv {

bool Reader::next(std::vector<std::string>& fields) {
    while (std::getline(in_, buffer_)) {
        ++line_;
        if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
        if (buffer_.find_first_not_of(" \t") == std::string::npos) continue;
        fields.clear();
        std::size_t start = 0;
        while (true) {
            const auto comma = buffer_.find(',', start);
            if (comma == std::string::npos) {
                fields.emplace_back(buffer_.substr(start));
                break;
            }
            fields.emplace_back(buffer_.substr(start, comma - start));
            start = comma + 1;
        }
        return true;
    }
    return false;
}

std::optional<double> parse_double(std::string_view text) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) return std::nullopt;
    return value;
}

std::optional<std::int64_t> parse_int(std::string_view text) {
    std::int64_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) return std::nullopt;
    return value;
}

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    (void)ec;
    return std::string(buf.data(), ptr);
}

}  // namespace ktrace::csv
