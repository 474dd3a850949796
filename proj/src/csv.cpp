#include "ppls/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ppls {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

Matrix read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open CSV file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw InputError("empty CSV file: " + path);
    const std::size_t ncols = split_line(line).size();
    if (ncols == 0) throw InputError("CSV header has no columns: " + path);

    std::vector<double> values;
    std::size_t nrows = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != ncols)
            throw InputError(path + ": ragged row at line " + std::to_string(lineno) + " (" +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(ncols) + ")");
        for (const auto& f : fields) {
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(f, &pos);
            } catch (const std::exception&) {
                throw InputError(path + ": bad numeric field '" + f + "' at line " +
                                 std::to_string(lineno));
            }
            if (pos != f.size())
                throw InputError(path + ": bad numeric field '" + f + "' at line " +
                                 std::to_string(lineno));
            values.push_back(v);
        }
        ++nrows;
    }
    Matrix m(nrows, ncols);
    for (std::size_t i = 0; i < nrows; ++i)
        for (std::size_t j = 0; j < ncols; ++j) m(i, j) = values[i * ncols + j];
    return m;
}

void write_csv_matrix(const std::string& path, const Matrix& m, const std::string& prefix) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write CSV file: " + path);
    for (int j = 0; j < m.cols(); ++j) {
        if (j) out << ',';
        out << prefix << (j + 1);
    }
    out << '\n';
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << fmt17(m(i, j));
        }
        out << '\n';
    }
}

void write_csv_rows(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write CSV file: " + path);
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j) out << ',';
        out << header[j];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out << ',';
            out << row[j];
        }
        out << '\n';
    }
}

}  // namespace ppls
