#pragma once

#include <iosfwd>
#include <string>

#include "catmc/types.hpp"

namespace catmc {

// Shortest text that parses back to the same double ("%.17g" fallback).
std::string format_real(double value);

// Dense text: one row per line, entries separated by single spaces.
void write_matrix(std::ostream& out, const Matrix& X);
Matrix read_matrix(std::istream& in);

void write_matrix_file(const std::string& path, const Matrix& X);
Matrix read_matrix_file(const std::string& path);

}  // namespace catmc
