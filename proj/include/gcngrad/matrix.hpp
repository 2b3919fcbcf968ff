#ifndef GCNGRAD_MATRIX_HPP
#define GCNGRAD_MATRIX_HPP

#include <cmath>
#include <cstddef>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcngrad {

/// Dense real matrix, float64 entries in row-major order.
///
/// Every quantity in this library (adjacency matrices, weight matrices,
/// block derivatives, gradients) lives in this one type. Indices are
/// 0-based at the API; documentation follows the usual 1-based math
/// convention.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0) {
            throw std::invalid_argument("Matrix: dimensions must be positive");
        }
    }

    /// Row-by-row construction: Matrix{{1,2},{3,4}}.
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows.begin() == rows.end() ? 0 : rows.begin()->size();
        if (rows_ == 0 || cols_ == 0) {
            throw std::invalid_argument("Matrix: dimensions must be positive");
        }
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) {
                throw std::invalid_argument("Matrix: ragged initializer");
            }
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double operator()(std::size_t i, std::size_t j) const {
        check_index(i, j);
        return data_[i * cols_ + j];
    }
    double& operator()(std::size_t i, std::size_t j) {
        check_index(i, j);
        return data_[i * cols_ + j];
    }

    /// Unchecked flat access, used by the arithmetic kernels.
    double at_flat(std::size_t k) const { return data_[k]; }
    double& at_flat(std::size_t k) { return data_[k]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool has_nan() const {
        for (double v : data_) {
            if (std::isnan(v)) return true;
        }
        return false;
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    static Matrix zeros(std::size_t rows, std::size_t cols) {
        return Matrix(rows, cols, 0.0);
    }

    /// All-ones matrix J.
    static Matrix ones(std::size_t rows, std::size_t cols) {
        return Matrix(rows, cols, 1.0);
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n, 0.0);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Matrix row(std::size_t i) const {
        if (i >= rows_) throw std::out_of_range("Matrix::row: index out of range");
        Matrix r(1, cols_);
        for (std::size_t j = 0; j < cols_; ++j) r.data_[j] = data_[i * cols_ + j];
        return r;
    }

    Matrix col(std::size_t j) const {
        if (j >= cols_) throw std::out_of_range("Matrix::col: index out of range");
        Matrix c(rows_, 1);
        for (std::size_t i = 0; i < rows_; ++i) c.data_[i] = data_[i * cols_ + j];
        return c;
    }

private:
    void check_index(std::size_t i, std::size_t j) const {
        if (i >= rows_ || j >= cols_) {
            throw std::out_of_range("Matrix: index (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") out of range for " +
                                    std::to_string(rows_) + "x" + std::to_string(cols_));
        }
    }

    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
    }
}

/// The one matrix-product kernel. Forward passes, the reverse-mode tape and
/// the closed-form gradients all multiply through here so that value
/// comparisons between methods see identical rounding on shared
/// subexpressions.
inline Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("multiply: inner dimensions disagree (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Matrix c(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                sum += a.at_flat(i * k + t) * b.at_flat(t * n + j);
            }
            c.at_flat(i * n + j) = sum;
        }
    }
    return c;
}

inline Matrix operator*(const Matrix& a, const Matrix& b) { return multiply(a, b); }

inline Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator+");
    Matrix c(a.rows(), a.cols());
    for (std::size_t k = 0; k < a.size(); ++k) c.at_flat(k) = a.at_flat(k) + b.at_flat(k);
    return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator-");
    Matrix c(a.rows(), a.cols());
    for (std::size_t k = 0; k < a.size(); ++k) c.at_flat(k) = a.at_flat(k) - b.at_flat(k);
    return c;
}

inline Matrix operator*(double s, const Matrix& a) {
    Matrix c(a.rows(), a.cols());
    for (std::size_t k = 0; k < a.size(); ++k) c.at_flat(k) = s * a.at_flat(k);
    return c;
}

inline Matrix operator*(const Matrix& a, double s) { return s * a; }

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t.at_flat(j * a.rows() + i) = a.at_flat(i * a.cols() + j);
        }
    }
    return t;
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a.at_flat(k) * a.at_flat(k);
    return std::sqrt(s);
}

inline bool exactly_equal(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a.at_flat(k) != b.at_flat(k)) return false;
    }
    return true;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        m = std::max(m, std::abs(a.at_flat(k) - b.at_flat(k)));
    }
    return m;
}

// --- CSV serialization: comma-separated, one row per line, no header. ---

inline std::string to_csv(const Matrix& a) {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (j) out << ',';
            out << a(i, j);
        }
        out << '\n';
    }
    return out.str();
}

inline void write_csv(const Matrix& a, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out << to_csv(a);
    if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

inline Matrix csv_to_matrix(std::istream& in, const std::string& name) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t pos = 0;
                double v = std::stod(cell, &pos);
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
                if (pos != cell.size()) throw std::invalid_argument("trailing garbage");
                row.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                         ": cannot parse '" + cell + "' as a number");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                     ": ragged row (expected " +
                                     std::to_string(rows.front().size()) + " columns)");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(name + ": empty matrix file");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows.front().size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

inline Matrix read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_csv: cannot open " + path);
    return csv_to_matrix(in, path);
}

}  // namespace gcngrad

#endif  // GCNGRAD_MATRIX_HPP
