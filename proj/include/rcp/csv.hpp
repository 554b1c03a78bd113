#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rcp/core.hpp"

namespace rcp {

/// Reads rows of p covariates followed by d responses. A first row that does
/// not parse as numbers is treated as a header. Errors carry line numbers.
LabeledDataset load_csv(const std::string& path, Index p, Index d);
LabeledDataset parse_csv(std::istream& in, Index p, Index d, const std::string& source = "<stream>");

/// Writes x columns then y columns with a header x0..,y0..; doubles are
/// printed with round-trip precision.
void write_csv(const std::string& path, const LabeledDataset& data);
void write_csv(std::ostream& out, const LabeledDataset& data);

/// Splits one line on commas, trimming surrounding whitespace.
std::vector<std::string> split_csv_line(const std::string& line);

/// Strict decimal parse of a whole field.
bool parse_double(const std::string& field, double* out);

}  // namespace rcp
