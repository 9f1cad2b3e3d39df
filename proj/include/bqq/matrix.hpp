#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bqq {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class MatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Real m x n matrix, row-major, 64-bit entries. Every entry is finite.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    explicit DenseMatrix(RowMajorMatrix m);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return static_cast<std::size_t>(data_.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(data_.cols()); }
    std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
    bool empty() const { return data_.size() == 0; }

    double operator()(std::size_t i, std::size_t j) const { return data_(i, j); }
    double& operator()(std::size_t i, std::size_t j) { return data_(i, j); }

    std::span<const double> values() const { return {data_.data(), size()}; }
    std::span<double> values() { return {data_.data(), size()}; }

    const RowMajorMatrix& eigen() const { return data_; }
    RowMajorMatrix& eigen() { return data_; }

    double min() const;
    double max() const;
    double mean() const;
    double squared_norm() const { return data_.squaredNorm(); }

    DenseMatrix block(std::size_t row, std::size_t col, std::size_t nrows, std::size_t ncols) const;
    void set_block(std::size_t row, std::size_t col, const DenseMatrix& src);

    bool operator==(const DenseMatrix& other) const;

private:
    void check_finite() const;

    RowMajorMatrix data_;
};

// Packed {0,1} matrix, row-major, 64 bits per word.
class BitMatrix {
public:
    BitMatrix() = default;
    BitMatrix(std::size_t rows, std::size_t cols);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return rows_ * cols_; }

    bool get(std::size_t i, std::size_t j) const {
        const std::size_t k = i * cols_ + j;
        return (words_[k >> 6] >> (k & 63)) & 1u;
    }
    void set(std::size_t i, std::size_t j, bool v) {
        const std::size_t k = i * cols_ + j;
        const std::uint64_t mask = std::uint64_t{1} << (k & 63);
        if (v)
            words_[k >> 6] |= mask;
        else
            words_[k >> 6] &= ~mask;
    }

    std::size_t popcount() const;

    // Throws MatrixError if any entry is not exactly 0 or 1.
    static BitMatrix from_dense(const DenseMatrix& m);
    // Entries >= threshold become 1 (so 0.5 maps to 1 with the default).
    static BitMatrix threshold(const RowMajorMatrix& m, double threshold = 0.5);
    DenseMatrix to_dense() const;
    RowMajorMatrix to_eigen() const;

    // Row-major, LSB-first within each byte, ceil(rows*cols/8) bytes.
    std::vector<std::uint8_t> to_bytes() const;
    static BitMatrix from_bytes(std::size_t rows, std::size_t cols, std::span<const std::uint8_t> bytes);

    bool operator==(const BitMatrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint64_t> words_;
};

struct StandardizationRecord {
    double mean = 0.0;
    double std = 1.0;
    bool constant = false;

    bool operator==(const StandardizationRecord&) const = default;
};

struct Standardized {
    DenseMatrix matrix;
    StandardizationRecord record;
};

// Zero mean, unit population variance. A constant input maps to zeros with
// record.std = 1 and record.constant set.
Standardized standardize(const DenseMatrix& w);
DenseMatrix destandardize(const DenseMatrix& w, const StandardizationRecord& record);

double mse(const DenseMatrix& a, const DenseMatrix& b);

struct MemoryFootprint {
    std::uint64_t binary_bits = 0;
    std::uint64_t scalar_count = 0;
    std::uint32_t scalar_bits_each = 32;
    std::uint64_t total_bits = 0;

    static MemoryFootprint make(std::uint64_t binary_bits, std::uint64_t scalar_count,
                                std::uint32_t scalar_bits_each = 32);
    MemoryFootprint& operator+=(const MemoryFootprint& other);
    // 1 KB = 1000 bytes.
    double kilobytes() const { return static_cast<double>(total_bits) / 8000.0; }

    bool operator==(const MemoryFootprint&) const = default;
};

MemoryFootprint bqq_footprint(std::uint64_t m, std::uint64_t n, std::uint64_t l, std::uint64_t p,
                              std::uint32_t scalar_bits = 32);

} // namespace bqq
