// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0

#include "deltalora/linalg.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace deltalora {

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) {
        throw std::invalid_argument("Matrix: dimensions must be positive, got " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    }
    data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Matrix m(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) {
            throw std::invalid_argument("Matrix::from_rows: ragged rows");
        }
        int j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) +
                                " vs " + shape_str(b));
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_error(op, a, b);
}

} // namespace

// -- Rng ---------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64(x);
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
}

static inline std::uint64_t rotl64(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
}

std::uint64_t Rng::next_u64() {
    // xoshiro256++ (Blackman & Vigna)
    const std::uint64_t result = rotl64(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl64(state_[3], 45);
    return result;
}

double Rng::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_in(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
}

double Rng::next_gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - next_uniform(); // (0, 1]; keeps log finite
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

int Rng::next_index(int bound) {
    if (bound <= 0) throw std::invalid_argument("Rng::next_index: bound must be positive");
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(bound)) >> 64);
}

// -- arithmetic ----------------------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions differ: " + shape_str(a) +
                                    " * " + shape_str(b));
    }
    Matrix out(a.rows(), b.cols());
    const int n = a.rows(), k = a.cols(), m = b.cols();
    for (int i = 0; i < n; ++i) {
        double* out_row = out.data() + static_cast<std::size_t>(i) * m;
        const double* a_row = a.data() + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double aip = a_row[p];
            const double* b_row = b.data() + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) out_row[j] += aip * b_row[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw std::invalid_argument("matmul_nt: inner dimensions differ: " + shape_str(a) +
                                    " * " + shape_str(b) + "^T");
    }
    Matrix out(a.rows(), b.rows());
    const int n = a.rows(), k = a.cols(), m = b.rows();
    for (int i = 0; i < n; ++i) {
        const double* a_row = a.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < m; ++j) {
            const double* b_row = b.data() + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("matmul_tn: inner dimensions differ: " + shape_str(a) +
                                    "^T * " + shape_str(b));
    }
    Matrix out(a.cols(), b.cols());
    const int n = a.cols(), k = a.rows(), m = b.cols();
    for (int p = 0; p < k; ++p) {
        const double* a_row = a.data() + static_cast<std::size_t>(p) * n;
        const double* b_row = b.data() + static_cast<std::size_t>(p) * m;
        for (int i = 0; i < n; ++i) {
            double* out_row = out.data() + static_cast<std::size_t>(i) * m;
            const double api = a_row[i];
            for (int j = 0; j < m; ++j) out_row[j] += api * b_row[j];
        }
    }
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape("add", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape("sub", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape("hadamard", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

void add_scaled(Matrix& y, double s, const Matrix& x) {
    require_same_shape("add_scaled", y, x);
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += s * x.data()[i];
}

void add_in_place(Matrix& y, const Matrix& x) {
    require_same_shape("add_in_place", y, x);
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += x.data()[i];
}

void scale_in_place(Matrix& y, double s) {
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] *= s;
}

double frobenius_norm(const Matrix& a) {
    return std::sqrt(dot_flat(a, a));
}

double dot_flat(const Matrix& a, const Matrix& b) {
    require_same_shape("dot_flat", a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i] * b.data()[i];
    return acc;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i]));
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape("max_abs_diff", a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

bool all_finite(const Matrix& a) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::isfinite(a.data()[i])) return false;
    return true;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        // NaN-safe exact comparison of the underlying representation.
        if (std::memcmp(&a.data()[i], &b.data()[i], sizeof(double)) != 0) return false;
    }
    return true;
}

double flat_cosine(const Matrix& a, const Matrix& b) {
    require_same_shape("flat_cosine", a, b);
    const double num = dot_flat(a, b);
    const double na = dot_flat(a, a);
    const double nb = dot_flat(b, b);
    if (na == 0.0 || nb == 0.0) {
        throw std::invalid_argument("flat_cosine: undefined for an all-zero matrix");
    }
    // Single sqrt of the product so that identical inputs give exactly 1.0.
    return num / std::sqrt(na * nb);
}

// -- initializers ---------------------------------------------------------------

Matrix kaiming_uniform(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    const double bound = std::sqrt(6.0 / static_cast<double>(cols));
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform_in(-bound, bound);
    return m;
}

Matrix gaussian_matrix(int rows, int cols, Rng& rng, double mean, double stddev) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = mean + stddev * rng.next_gaussian();
    return m;
}

} // namespace deltalora
