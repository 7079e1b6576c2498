// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal RFC 4180 reader/writer helpers for the manifest and report files.

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace geoannot {

using CsvRow = std::vector<std::string>;

// Quotes the field if it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);
std::string csv_join(const CsvRow& fields);

// Parses the whole stream. Quoted fields may contain commas, doubled quotes and
// newlines. Blank lines are skipped. Throws geoannot::Error on an unterminated
// quote.
std::vector<CsvRow> read_csv(std::istream& in);

}  // namespace geoannot
