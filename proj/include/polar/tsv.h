#ifndef POLAR_TSV_H_
#define POLAR_TSV_H_

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

// Locale-independent helpers for the tab-separated tables every subcommand
// reads and writes.
namespace polar::tsv {

// Shortest decimal string that parses back to the same double; "nan", "inf"
// and "-inf" for non-finite values.
std::string format(double value);
std::string format(std::int64_t value);

// Fixed-point formatting with `digits` decimals, used for human-facing
// percentages.
std::string format_fixed(double value, int digits);

std::optional<double> parse_double(std::string_view field);
std::optional<std::int64_t> parse_int(std::string_view field);

std::vector<std::string_view> split(std::string_view line, char sep = '\t');

// Reads one line, dropping a trailing '\r'. Returns false at end of stream.
bool read_line(std::istream &in, std::string &line);

// Writes fields joined by tabs and a terminating '\n'.
void write_row(std::ostream &out, const std::vector<std::string> &fields);

}  // namespace polar::tsv

#endif  // POLAR_TSV_H_
