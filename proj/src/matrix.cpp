#include "bqq/matrix.hpp"

#include <bit>
#include <cmath>

namespace bqq {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : data_(RowMajorMatrix::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols), fill)) {
    if (!std::isfinite(fill))
        throw MatrixError("DenseMatrix: non-finite fill value");
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols)
        throw MatrixError("DenseMatrix: expected " + std::to_string(rows * cols) + " values, got " +
                          std::to_string(values.size()));
    data_ = Eigen::Map<const RowMajorMatrix>(values.data(), static_cast<Eigen::Index>(rows),
                                             static_cast<Eigen::Index>(cols));
    check_finite();
}

DenseMatrix::DenseMatrix(RowMajorMatrix m) : data_(std::move(m)) { check_finite(); }

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t nrows = rows.size();
    const std::size_t ncols = nrows ? rows.begin()->size() : 0;
    data_.resize(static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(ncols));
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != ncols)
            throw MatrixError("DenseMatrix: ragged initializer");
        std::size_t j = 0;
        for (double v : row)
            data_(i, j++) = v;
        ++i;
    }
    check_finite();
}

void DenseMatrix::check_finite() const {
    if (!data_.allFinite())
        throw MatrixError("DenseMatrix: non-finite entry");
}

double DenseMatrix::min() const {
    if (empty())
        throw MatrixError("min of empty matrix");
    return data_.minCoeff();
}

double DenseMatrix::max() const {
    if (empty())
        throw MatrixError("max of empty matrix");
    return data_.maxCoeff();
}

double DenseMatrix::mean() const {
    if (empty())
        throw MatrixError("mean of empty matrix");
    return data_.mean();
}

DenseMatrix DenseMatrix::block(std::size_t row, std::size_t col, std::size_t nrows, std::size_t ncols) const {
    if (row + nrows > rows() || col + ncols > cols())
        throw MatrixError("DenseMatrix::block out of range");
    return DenseMatrix(RowMajorMatrix(data_.block(row, col, nrows, ncols)));
}

void DenseMatrix::set_block(std::size_t row, std::size_t col, const DenseMatrix& src) {
    if (row + src.rows() > rows() || col + src.cols() > cols())
        throw MatrixError("DenseMatrix::set_block out of range");
    data_.block(row, col, src.rows(), src.cols()) = src.eigen();
}

bool DenseMatrix::operator==(const DenseMatrix& other) const {
    return rows() == other.rows() && cols() == other.cols() && data_ == other.data_;
}

BitMatrix::BitMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), words_((rows * cols + 63) / 64, 0) {}

std::size_t BitMatrix::popcount() const {
    std::size_t n = 0;
    for (auto w : words_)
        n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

BitMatrix BitMatrix::from_dense(const DenseMatrix& m) {
    BitMatrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            if (v != 0.0 && v != 1.0)
                throw MatrixError("BitMatrix: entry (" + std::to_string(i) + "," + std::to_string(j) +
                                  ") is not 0 or 1");
            out.set(i, j, v == 1.0);
        }
    return out;
}

BitMatrix BitMatrix::threshold(const RowMajorMatrix& m, double threshold) {
    BitMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out.set(i, j, m(i, j) >= threshold);
    return out;
}

RowMajorMatrix BitMatrix::to_eigen() const {
    RowMajorMatrix out(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j)
            out(i, j) = get(i, j) ? 1.0 : 0.0;
    return out;
}

DenseMatrix BitMatrix::to_dense() const { return DenseMatrix(to_eigen()); }

std::vector<std::uint8_t> BitMatrix::to_bytes() const {
    std::vector<std::uint8_t> out((size() + 7) / 8, 0);
    for (std::size_t k = 0; k < size(); ++k)
        if ((words_[k >> 6] >> (k & 63)) & 1u)
            out[k >> 3] |= static_cast<std::uint8_t>(1u << (k & 7));
    return out;
}

BitMatrix BitMatrix::from_bytes(std::size_t rows, std::size_t cols, std::span<const std::uint8_t> bytes) {
    BitMatrix out(rows, cols);
    if (bytes.size() != (rows * cols + 7) / 8)
        throw MatrixError("BitMatrix::from_bytes: expected " + std::to_string((rows * cols + 7) / 8) +
                          " bytes, got " + std::to_string(bytes.size()));
    for (std::size_t k = 0; k < rows * cols; ++k)
        if ((bytes[k >> 3] >> (k & 7)) & 1u)
            out.words_[k >> 6] |= std::uint64_t{1} << (k & 63);
    return out;
}

Standardized standardize(const DenseMatrix& w) {
    if (w.empty())
        throw MatrixError("standardize: empty matrix");
    const double mean = w.mean();
    RowMajorMatrix centered = w.eigen().array() - mean;
    const double var = centered.squaredNorm() / static_cast<double>(w.size());
    const double sd = std::sqrt(var);
    // Treat spreads at rounding level of the mean as constant.
    if (!(sd > 1e-14 * std::max(1.0, std::abs(mean))))
        return {DenseMatrix(w.rows(), w.cols(), 0.0), {mean, 1.0, true}};
    centered /= sd;
    return {DenseMatrix(std::move(centered)), {mean, sd, false}};
}

DenseMatrix destandardize(const DenseMatrix& w, const StandardizationRecord& record) {
    return DenseMatrix(RowMajorMatrix((w.eigen().array() * record.std + record.mean).matrix()));
}

double mse(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw MatrixError("mse: shape mismatch " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                          " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    if (a.empty())
        throw MatrixError("mse: empty matrices");
    return (a.eigen() - b.eigen()).squaredNorm() / static_cast<double>(a.size());
}

MemoryFootprint MemoryFootprint::make(std::uint64_t binary_bits, std::uint64_t scalar_count,
                                      std::uint32_t scalar_bits_each) {
    if (scalar_bits_each == 0)
        throw MatrixError("MemoryFootprint: scalar width must be positive");
    return {binary_bits, scalar_count, scalar_bits_each, binary_bits + scalar_count * scalar_bits_each};
}

MemoryFootprint& MemoryFootprint::operator+=(const MemoryFootprint& other) {
    if (other.scalar_bits_each != scalar_bits_each)
        throw MatrixError("MemoryFootprint: mixed scalar widths");
    *this = make(binary_bits + other.binary_bits, scalar_count + other.scalar_count, scalar_bits_each);
    return *this;
}

MemoryFootprint bqq_footprint(std::uint64_t m, std::uint64_t n, std::uint64_t l, std::uint64_t p,
                              std::uint32_t scalar_bits) {
    return MemoryFootprint::make(p * l * (m + n), 3 * p + 1, scalar_bits);
}

} // namespace bqq
