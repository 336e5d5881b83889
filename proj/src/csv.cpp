#include "hjweave/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "hjweave/errors.hpp"

namespace hjweave::csv {

std::string format(double value) {
    if (value == 0.0) return "0";  // folds -0 so output is sign-stable
    std::array<char, 64> buffer{};
    const auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    if (ec != std::errc{}) throw InvalidInputError("csv: cannot format value");
    return std::string(buffer.data(), end);
}

double parse(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\r' || text.back() == '\t'))
        text.remove_suffix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw InvalidInputError("csv: malformed number '" + std::string(text) + "'");
    return value;
}

std::vector<std::string_view> split(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> fields;
    std::size_t begin = 0;
    while (true) {
        const std::size_t comma = line.find(',', begin);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(begin));
            break;
        }
        fields.push_back(line.substr(begin, comma - begin));
        begin = comma + 1;
    }
    return fields;
}

}  // namespace hjweave::csv
