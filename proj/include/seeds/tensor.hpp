#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace seeds {

/// Thrown on any shape disagreement between operands.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Row-major dense matrix of doubles. A batch of vectors is a Matrix with one
/// sample per row.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    void fill(double v);
    bool all_finite() const noexcept;
    std::string shape_string() const;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

/// a · bᵀ  (a: n×k, b: m×k) -> n×m
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a · b   (a: n×k, b: k×m) -> n×m
Matrix matmul_nn(const Matrix& a, const Matrix& b);
/// aᵀ · b  (a: k×n, b: k×m) -> n×m
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// Column-wise concatenation of equally tall blocks.
Matrix hconcat(std::initializer_list<const Matrix*> parts);
/// Columns [begin, begin + count).
Matrix column_slice(const Matrix& m, std::size_t begin, std::size_t count);
/// Adds `src` into columns [begin, begin + src.cols()) of `dst`.
void add_column_slice(Matrix& dst, const Matrix& src, std::size_t begin);
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
double frobenius_norm(const Matrix& m);

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what);
void require_cols(const Matrix& m, std::size_t cols, const char* what);

}  // namespace seeds
