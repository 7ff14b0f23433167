#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace synergy::csv {

using Row = std::vector<std::string>;

/// Minimal RFC 4180 reader: comma separated, optional double-quoted fields,
/// CRLF tolerated. Blank lines are skipped.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    /// Reads the next record; returns false at end of stream.
    bool next(Row& row);

    /// Line number (1-based) where the last returned record started.
    std::size_t line() const noexcept { return record_line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
    std::size_t record_line_ = 0;
};

/// Reads the header and checks it matches `expected` exactly (after trimming).
Row read_header(Reader& reader, const Row& expected, std::string_view what);

std::string quote(std::string_view field);
void write_row(std::ostream& out, const Row& row);

std::string trim(std::string_view s);

/// Parses a decimal number, throwing ParseError tagged with `line` on failure.
double parse_double(std::string_view s, std::size_t line);

/// Fixed-point formatting with the given number of decimals ("%.*f").
std::string fixed(double v, int decimals);

}  // namespace synergy::csv
