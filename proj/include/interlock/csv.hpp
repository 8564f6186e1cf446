#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace interlock::csv {

// Streaming RFC-4180 reader: comma separated, double-quote escaping, quoted
// fields may contain commas, quotes ("") and line breaks. Accepts LF and CRLF.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    // Reads the next record into `fields`. Returns false at end of input.
    // A record with an unterminated quote is returned with `malformed()` set.
    bool next(std::vector<std::string>& fields);

    bool malformed() const noexcept { return malformed_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    bool malformed_ = false;
    std::size_t line_ = 0;
};

// Reads the header and throws SchemaError unless it equals `expected`
// (after trimming whitespace and a UTF-8 BOM on the first field).
void expect_header(Reader& reader, const std::vector<std::string>& expected,
                   std::string_view source_name);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace interlock::csv
