#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "lscp/pipeline.hpp"

namespace lscp {

// Malformed input data (CSV that is not a numeric column, unreadable
// files). Distinct from std::invalid_argument so callers can map it to a
// dedicated exit status.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One numeric value per line; a single non-numeric first line is treated
// as a header and skipped. Blank lines and trailing \r are ignored.
TimeSeries read_series_csv(std::istream& in, const std::string& origin = "<stream>");
TimeSeries read_series_csv_file(const std::string& path);

std::string series_to_csv(const TimeSeries& x);  // "x" header + one value per line

std::string detection_result_to_json(const DetectionResult& result);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace lscp
