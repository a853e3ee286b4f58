// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major float64 matrices plus the seeded PRNG used by every other
// module. All free functions are pure; Matrix values may be shared across
// threads for reading. An Rng is single-owner and must not be shared.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace deltalora {

/// Dense 2-D array of doubles, row-major. The universal value type.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols);

    static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
    static Matrix identity(int n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

std::string shape_str(const Matrix& m);

/// Seedable PRNG: xoshiro256++ with splitmix64 seeding. Same seed gives the
/// same stream on every platform this builds on; cross-language bit
/// compatibility is not a goal.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double next_uniform();
    double uniform_in(double lo, double hi);
    /// Standard normal via Box-Muller; second draw of each pair is cached.
    double next_gaussian();
    /// Uniform integer in [0, bound); bound must be positive.
    int next_index(int bound);

private:
    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// One step of the splitmix64 sequence; advances x.
std::uint64_t splitmix64(std::uint64_t& x);
/// Deterministic combiner for deriving sub-seeds, e.g. mix64(seed, step).
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

// -- arithmetic ------------------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b);
/// a * transpose(b) without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// transpose(a) * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

/// y += s * x, in place.
void add_scaled(Matrix& y, double s, const Matrix& x);
void add_in_place(Matrix& y, const Matrix& x);
void scale_in_place(Matrix& y, double s);

double frobenius_norm(const Matrix& a);
double dot_flat(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);
bool bit_equal(const Matrix& a, const Matrix& b);

/// Cosine of the angle between the flattened matrices. Throws if either
/// argument is all-zero (the cosine is undefined) or shapes differ.
double flat_cosine(const Matrix& a, const Matrix& b);

// -- initializers ----------------------------------------------------------

/// Entries i.i.d. uniform on [-sqrt(6/fan_in), +sqrt(6/fan_in)] with
/// fan_in = cols (the input features of a weight applied as h = W x).
Matrix kaiming_uniform(int rows, int cols, Rng& rng);
Matrix gaussian_matrix(int rows, int cols, Rng& rng, double mean = 0.0, double stddev = 1.0);

} // namespace deltalora
