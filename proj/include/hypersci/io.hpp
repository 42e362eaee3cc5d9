#pragma once

#include <string>
#include <vector>

#include "hypersci/tensor.hpp"

namespace hypersci {

// Writes via a temp file in the same directory, then renames into place.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Shortest round-trip decimal form of a double ("%.17g" fallback when fewer
// digits do not round-trip).
std::string format_double(double v);

// Headerless CSV, one row per line, comma separated.
Tensor read_csv_matrix(const std::string& path);
void write_csv_matrix(const std::string& path, const Tensor& t);

std::vector<int> read_csv_int_vector(const std::string& path);
void write_csv_int_vector(const std::string& path, const std::vector<int>& v);

std::vector<double> read_csv_vector(const std::string& path);
void write_csv_vector(const std::string& path, const std::vector<double>& v);

}  // namespace hypersci
