// SPDX-License-Identifier: MIT
#include "srkd/core.hpp"

#include <fmt/format.h>

namespace srkd {

auto format_real(double value) -> std::string
{
    return fmt::format("{:.17g}", value);
}

auto take_rows(Matrix const& X, std::vector<Index> const& rows) -> Matrix
{
    Matrix out(static_cast<Index>(rows.size()), X.cols());
    for (Index i = 0; i < out.rows(); ++i) {
        out.row(i) = X.row(rows[static_cast<std::size_t>(i)]);
    }
    return out;
}

auto take_rows(Vector const& y, std::vector<Index> const& rows) -> Vector
{
    Vector out(static_cast<Index>(rows.size()));
    for (Index i = 0; i < out.size(); ++i) {
        out(i) = y(rows[static_cast<std::size_t>(i)]);
    }
    return out;
}

auto csv_field(std::string_view text, char delimiter) -> std::string
{
    if (text.find_first_of(std::string { delimiter, '"', '\n', '\r' }) == std::string_view::npos) {
        return std::string(text);
    }
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

} // namespace srkd
