#include "banditscreen/matrix.hpp"

#include <cmath>
#include <string>

#include "banditscreen/errors.hpp"

namespace banditscreen {

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, Vector data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    ensure_finite("matrix construction");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("ragged initializer for matrix");
        data_.insert(data_.end(), r.begin(), r.end());
    }
    ensure_finite("matrix construction");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_row(const Vector& v) {
    return Matrix(1, v.size(), v);
}

Vector Matrix::row_vector(std::size_t r) const {
    return Vector(row(r), row(r) + cols_);
}

Vector Matrix::col_vector(std::size_t c) const {
    Vector v(rows_);
    for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
    return v;
}

void Matrix::set_row(std::size_t r, const Vector& v) {
    if (v.size() != cols_) throw ShapeError("row assignment width mismatch");
    std::copy(v.begin(), v.end(), row(r));
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Matrix Matrix::operator+(const Matrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_) throw ShapeError("matrix addition shape mismatch");
    Matrix out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i] + other.data_[i];
    out.ensure_finite("matrix addition");
    return out;
}

Matrix Matrix::operator-(const Matrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_) throw ShapeError("matrix subtraction shape mismatch");
    Matrix out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i] - other.data_[i];
    out.ensure_finite("matrix subtraction");
    return out;
}

Matrix Matrix::operator*(double s) const {
    Matrix out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i] * s;
    out.ensure_finite("matrix scaling");
    return out;
}

Matrix Matrix::matmul(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) {
        throw ShapeError("matmul shape mismatch: " + std::to_string(a.rows_) + "x" + std::to_string(a.cols_) +
                         " * " + std::to_string(b.rows_) + "x" + std::to_string(b.cols_));
    }
    Matrix c(a.rows_, b.cols_);
    const std::size_t n = a.rows_, k = a.cols_, m = b.cols_;
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b.row(p);
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
    c.ensure_finite("matmul");
    return c;
}

Matrix Matrix::matmul_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.cols_) {
        throw ShapeError("matmul_transposed shape mismatch: " + std::to_string(a.rows_) + "x" +
                         std::to_string(a.cols_) + " * (" + std::to_string(b.rows_) + "x" +
                         std::to_string(b.cols_) + ")^T");
    }
    Matrix c(a.rows_, b.rows_);
    const std::size_t k = a.cols_;
    for (std::size_t i = 0; i < a.rows_; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t j = 0; j < b.rows_; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
    c.ensure_finite("matmul_transposed");
    return c;
}

double Matrix::frobenius_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return std::sqrt(acc);
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Matrix::ensure_finite(const char* what) const {
    if (!all_finite()) throw NumericError(std::string("non-finite values after ") + what);
}

}  // namespace banditscreen
