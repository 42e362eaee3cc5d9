#include "hypersci/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hypersci/errors.hpp"

namespace hypersci {

namespace fs = std::filesystem;

void atomic_write_file(const std::string& path, const std::string& content) {
    fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write file: " + tmp.string());
        out << content;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("rename failed: " + tmp.string() + " -> " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) return buf;
    }
    return buf;
}

Tensor read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                size_t used = 0;
                row.push_back(std::stod(cell, &used));
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError(path + ":" + std::to_string(lineno) + ": inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path + ": empty matrix");
    Tensor t(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int i = 0; i < t.rows; ++i)
        for (int j = 0; j < t.cols; ++j) t(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return t;
}

void write_csv_matrix(const std::string& path, const Tensor& t) {
    std::ostringstream out;
    for (int i = 0; i < t.rows; ++i) {
        for (int j = 0; j < t.cols; ++j) {
            if (j) out << ',';
            out << format_double(t(i, j));
        }
        out << '\n';
    }
    atomic_write_file(path, out.str());
}

std::vector<int> read_csv_int_vector(const std::string& path) {
    Tensor t = read_csv_matrix(path);
    if (t.cols != 1) throw ParseError(path + ": expected a single column");
    std::vector<int> v(static_cast<size_t>(t.rows));
    for (int i = 0; i < t.rows; ++i) {
        double x = t(i, 0);
        int r = static_cast<int>(x);
        if (static_cast<double>(r) != x) throw ParseError(path + ": non-integer value at row " + std::to_string(i));
        v[static_cast<size_t>(i)] = r;
    }
    return v;
}

void write_csv_int_vector(const std::string& path, const std::vector<int>& v) {
    std::ostringstream out;
    for (int x : v) out << x << '\n';
    atomic_write_file(path, out.str());
}

std::vector<double> read_csv_vector(const std::string& path) {
    Tensor t = read_csv_matrix(path);
    if (t.cols != 1) throw ParseError(path + ": expected a single column");
    return t.data;
}

void write_csv_vector(const std::string& path, const std::vector<double>& v) {
    std::ostringstream out;
    for (double x : v) out << format_double(x) << '\n';
    atomic_write_file(path, out.str());
}

}  // namespace hypersci
