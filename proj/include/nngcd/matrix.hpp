#ifndef NNGCD_MATRIX_HPP
#define NNGCD_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nngcd/errors.hpp"

namespace nngcd {

using Vector = std::vector<double>;

/// Row-major dense matrix of doubles. Every matrix in the library (kernels,
/// factors, layer weights, feature batches) is one of these.
class DenseMatrix {
  public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        require(data_.size() == rows_ * cols_, "DenseMatrix: data length " + std::to_string(data_.size()) +
                                                   " does not match " + std::to_string(rows_) + "x" +
                                                   std::to_string(cols_));
    }

    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            require(r.size() == cols_, "DenseMatrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static DenseMatrix from_row(std::span<const double> values) {
        return DenseMatrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    bool same_shape(const DenseMatrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    DenseMatrix& operator+=(const DenseMatrix& other) {
        require(same_shape(other), "DenseMatrix +=: shape mismatch");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
        return *this;
    }
    DenseMatrix& operator-=(const DenseMatrix& other) {
        require(same_shape(other), "DenseMatrix -=: shape mismatch");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
        return *this;
    }
    DenseMatrix& operator*=(double s) noexcept {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
inline DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
inline DenseMatrix operator*(DenseMatrix a, double s) { return a *= s; }
inline DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

inline double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "dot: length mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

inline void check_finite(const DenseMatrix& m, const std::string& what) {
    if (!all_finite(m.values())) throw NumericError(what + ": non-finite entry");
}

// ---------------------------------------------------------------------------
// Norms

inline double frobenius_norm_sq(const DenseMatrix& m) {
    double s = 0.0;
    for (double v : m.values()) s += v * v;
    return s;
}

inline double l1_norm(const DenseMatrix& m) {
    double s = 0.0;
    for (double v : m.values()) s += std::abs(v);
    return s;
}

/// Sum over rows of the row Euclidean norms.
inline double l21_norm(const DenseMatrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) s += norm2(m.row(i));
    return s;
}

// ---------------------------------------------------------------------------
// Products

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                                      std::to_string(b.rows()) + " disagree");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
        }
    }
    return c;
}

/// A^T B without materializing the transpose.
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.rows() == b.rows(), "matmul_tn: row counts disagree");
    DenseMatrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto arow = a.row(k);
        auto brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            auto out = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aki * brow[j];
        }
    }
    return c;
}

/// A B^T without materializing the transpose.
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.cols(), "matmul_nt: column counts disagree");
    DenseMatrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
    return c;
}

inline DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.same_shape(b), "hadamard: shape mismatch");
    DenseMatrix c = a;
    auto cv = c.values();
    auto bv = b.values();
    for (std::size_t k = 0; k < cv.size(); ++k) cv[k] *= bv[k];
    return c;
}

inline double trace(const DenseMatrix& a) {
    require(a.rows() == a.cols(), "trace: matrix is not square");
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
    return s;
}

inline double max_abs_asymmetry(const DenseMatrix& a) {
    require(a.rows() == a.cols(), "matrix is not square");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - a(j, i)));
    return worst;
}

inline double min_entry(const DenseMatrix& a) {
    double m = std::numeric_limits<double>::infinity();
    for (double v : a.values()) m = std::min(m, v);
    return m;
}

inline Vector row_sums(const DenseMatrix& a) {
    Vector s(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (double v : a.row(i)) s[i] += v;
    return s;
}

/// Copy of the selected rows, in the given order.
inline DenseMatrix gather_rows(const DenseMatrix& a, std::span<const std::size_t> indices) {
    DenseMatrix out(indices.size(), a.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        require(indices[r] < a.rows(), "gather_rows: index out of range");
        std::copy_n(a.row(indices[r]).begin(), a.cols(), out.row(r).begin());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Softmax family

inline double logsumexp(std::span<const double> v) {
    if (v.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

inline Vector softmax(std::span<const double> v, double temperature = 1.0) {
    require(temperature > 0.0, "softmax: temperature must be positive");
    require(!v.empty(), "softmax: empty input");
    Vector out(v.size());
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        out[k] = std::exp((v[k] - m) / temperature);
        s += out[k];
    }
    for (double& x : out) x /= s;
    return out;
}

}  // namespace nngcd

#endif  // NNGCD_MATRIX_HPP
