#include "seeds/tensor.hpp"

#include <cmath>
#include <sstream>

namespace seeds {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                         " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) throw ShapeError("Matrix::from_rows: ragged rows");
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

void Matrix::fill(double v) {
    for (double& x : data_) x = v;
}

bool Matrix::all_finite() const noexcept {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string Matrix::shape_string() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Matrix& Matrix::operator+=(const Matrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_)
        throw ShapeError("Matrix +=: " + shape_string() + " vs " + o.shape_string());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_)
        throw ShapeError("Matrix -=: " + shape_string() + " vs " + o.shape_string());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw ShapeError("matmul_nt: " + a.shape_string() + " · " + b.shape_string() + "ᵀ");
    Matrix out(a.rows(), b.rows());
    const std::size_t k = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.data().data() + i * k;
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* br = b.data().data() + j * k;
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += ar[t] * br[t];
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix matmul_nn(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul_nn: " + a.shape_string() + " · " + b.shape_string());
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* o = out.data().data() + i * b.cols();
        for (std::size_t t = 0; t < a.cols(); ++t) {
            const double av = a(i, t);
            if (av == 0.0) continue;
            const double* br = b.data().data() + t * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) o[j] += av * br[j];
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw ShapeError("matmul_tn: " + a.shape_string() + "ᵀ · " + b.shape_string());
    Matrix out(a.cols(), b.cols());
    for (std::size_t t = 0; t < a.rows(); ++t) {
        const double* ar = a.data().data() + t * a.cols();
        const double* br = b.data().data() + t * b.cols();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double av = ar[i];
            if (av == 0.0) continue;
            double* o = out.data().data() + i * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) o[j] += av * br[j];
        }
    }
    return out;
}

Matrix hconcat(std::initializer_list<const Matrix*> parts) {
    std::size_t rows = (*parts.begin())->rows();
    std::size_t cols = 0;
    for (const Matrix* p : parts) {
        if (p->rows() != rows)
            throw ShapeError("hconcat: row count " + std::to_string(p->rows()) + " != " +
                             std::to_string(rows));
        cols += p->cols();
    }
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t off = 0;
        for (const Matrix* p : parts) {
            for (std::size_t c = 0; c < p->cols(); ++c) out(r, off + c) = (*p)(r, c);
            off += p->cols();
        }
    }
    return out;
}

Matrix column_slice(const Matrix& m, std::size_t begin, std::size_t count) {
    if (begin + count > m.cols()) throw ShapeError("column_slice out of range");
    Matrix out(m.rows(), count);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, begin + c);
    return out;
}

void add_column_slice(Matrix& dst, const Matrix& src, std::size_t begin) {
    if (dst.rows() != src.rows() || begin + src.cols() > dst.cols())
        throw ShapeError("add_column_slice: " + src.shape_string() + " into " + dst.shape_string());
    for (std::size_t r = 0; r < src.rows(); ++r)
        for (std::size_t c = 0; c < src.cols(); ++c) dst(r, begin + c) += src(r, c);
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto src = m.row(idx[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ShapeError("dot: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

double frobenius_norm(const Matrix& m) { return l2_norm(m.data()); }

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << what << ": expected (" << rows << "x" << cols << "), got " << m.shape_string();
        throw ShapeError(os.str());
    }
}

void require_cols(const Matrix& m, std::size_t cols, const char* what) {
    if (m.cols() != cols) {
        std::ostringstream os;
        os << what << ": expected width " << cols << ", got " << m.shape_string();
        throw ShapeError(os.str());
    }
}

}  // namespace seeds
