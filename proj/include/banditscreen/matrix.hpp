#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace banditscreen {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Named operations validate shapes and
// leave results finite; violations raise ShapeError / NumericError.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, Vector data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix from_row(const Vector& v);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    Vector row_vector(std::size_t r) const;
    Vector col_vector(std::size_t c) const;
    void set_row(std::size_t r, const Vector& v);

    Matrix transpose() const;
    Matrix operator+(const Matrix& other) const;
    Matrix operator-(const Matrix& other) const;
    Matrix operator*(double s) const;

    // a[n x k] * b[k x m]
    static Matrix matmul(const Matrix& a, const Matrix& b);
    // a[n x k] * b[m x k]^T; contiguous dot products, used by backprop.
    static Matrix matmul_transposed(const Matrix& a, const Matrix& b);

    double frobenius_norm() const;
    double max_abs() const;
    bool all_finite() const;
    void ensure_finite(const char* what) const;  // throws NumericError

    bool operator==(const Matrix& other) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

}  // namespace banditscreen
