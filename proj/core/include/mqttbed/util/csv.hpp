#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mqttbed::util {

/// RFC 4180: quote fields containing comma, quote, CR or LF; double quotes.
std::string csv_field(const std::string& value);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Parses RFC 4180 text, accepting CRLF or LF line ends.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);

/// Printable rendering of arbitrary bytes: valid UTF-8 text passes through,
/// backslash becomes "\\", and control bytes or invalid sequences become \xHH.
std::string escape_bytes(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> unescape_bytes(const std::string& text);

}  // namespace mqttbed::util
