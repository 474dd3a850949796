#pragma once

#include <string>
#include <vector>

#include "ppls/common.hpp"

namespace ppls {

// Reads a numeric CSV with a single header row. Throws InputError naming the
// offending line on ragged rows or unparsable fields.
Matrix read_csv_matrix(const std::string& path);

// Writes a matrix as CSV with header `<prefix>1..<prefix>d`, one sample per
// row, 17 significant digits.
void write_csv_matrix(const std::string& path, const Matrix& m, const std::string& prefix);

// Generic row-oriented CSV writer for result tables.
void write_csv_rows(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows);

}  // namespace ppls
