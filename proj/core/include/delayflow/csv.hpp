#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace delayflow {

/// One rejected input row: original 1-based row number (header row is 1) plus
/// a human-readable reason. Rejections are reported, never silently dropped.
struct RowDiagnostic {
    std::size_t row_number = 0;
    std::string reason;
};

std::string trim(std::string_view s);

/// Splits one CSV record into fields. Supports RFC-4180 quoting with ""
/// escapes; unquoted fields are trimmed of surrounding whitespace.
std::vector<std::string> split_csv_row(const std::string& record);

/// Quotes a field when it contains a delimiter, quote or newline.
std::string csv_quote(std::string_view field);

/// Reads one physical CSV record, joining lines while a quoted field is open.
/// Returns false at end of stream.
bool read_csv_record(std::istream& in, std::string& out);

std::string format_double(double v, int precision);

/// Shortest round-trippable text form of a double.
std::string format_double_exact(double v);

}  // namespace delayflow
