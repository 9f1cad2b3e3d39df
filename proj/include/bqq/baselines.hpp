#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "bqq/matrix.hpp"

namespace bqq::baselines {

// ---------------------------------------------------------------------------
// Uniform quantization with a grid-searched clipping range.

struct UqCode {
    std::uint32_t bits = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint32_t> indices;  // row-major, each < 2^bits
    double scale = 0.0;                  // a
    double bias = 0.0;                   // b

    DenseMatrix dequantize() const;
    MemoryFootprint footprint(std::uint32_t scalar_bits = 32) const;

    bool operator==(const UqCode&) const = default;
};

// Searches r_max over linspace(mean, max, n_split) and r_min over
// linspace(min, mean, n_split); keeps the first configuration with the
// lowest MSE. Constant input gives scale 0, bias = value.
UqCode uq_grid(std::span<const double> values, std::size_t rows, std::size_t cols, std::uint32_t bits,
               std::size_t n_split = 100);
UqCode uq_grid(const DenseMatrix& w, std::uint32_t bits, std::size_t n_split = 100);

// Plain min/max range, no search.
UqCode uq_minmax(const DenseMatrix& w, std::uint32_t bits);

// ---------------------------------------------------------------------------
// Binary coding quantization, W ~ sum_i a_i B_i with B_i in {-1, +1}.

struct BcqCode {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<BitMatrix> bases;  // bit set means +1
    std::vector<double> scales;

    DenseMatrix dequantize() const;
    MemoryFootprint footprint(std::uint32_t scalar_bits = 32) const;

    bool operator==(const BcqCode&) const = default;
};

// Greedy residual fitting; after each round one alternating pass refits all
// scales by least squares and re-selects every element's sign combination.
// If residual_sq_norms is given it receives ||W - W_i||^2 after each round.
BcqCode bcq(const DenseMatrix& w, std::size_t p, std::vector<double>* residual_sq_norms = nullptr);

// ---------------------------------------------------------------------------
// Low-rank factorization, optionally with UQ factors.

struct SvdCode {
    std::size_t rank = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    RowMajorMatrix left;   // m x rank, U sqrt(Sigma)
    RowMajorMatrix right;  // rank x n, sqrt(Sigma) V^T
    std::optional<UqCode> left_q;
    std::optional<UqCode> right_q;

    DenseMatrix dequantize() const;
    MemoryFootprint footprint(std::uint32_t scalar_bits = 32) const;
};

SvdCode svd_lowrank(const DenseMatrix& w, std::size_t rank);
SvdCode svd_uq(const DenseMatrix& w, std::size_t rank, std::uint32_t bits, std::size_t n_split = 100);

// ---------------------------------------------------------------------------
// k-means vector quantization over the flattened, zero-padded matrix.

struct VqCode {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t vec_dim = 0;
    std::size_t k = 0;
    RowMajorMatrix codebook;                 // k x vec_dim
    std::optional<UqCode> codebook_q;        // present for VQ + UQ
    std::vector<std::uint32_t> assignments;  // one per vector
    std::vector<double> objective_trace;     // within-cluster SSE after each Lloyd iteration

    DenseMatrix dequantize() const;
    MemoryFootprint footprint(std::uint32_t scalar_bits = 32) const;
    static std::uint32_t index_bits(std::size_t k);
};

struct KMeansOptions {
    std::size_t max_iter = 100;
    double tol = 1e-6;  // relative objective change
};

VqCode vq_kmeans(const DenseMatrix& w, std::size_t vec_dim, std::size_t k, std::uint64_t seed,
                 std::optional<std::uint32_t> centroid_bits = std::nullopt, const KMeansOptions& opts = {});

// ---------------------------------------------------------------------------
// E8 lattice vector quantization with residual rounds.

inline constexpr std::size_t kE8CodebookSize = 240;
using E8Vector = std::array<double, 8>;

// 112 vectors with two entries +-1, then 128 vectors (+-1/2)^8 with an even
// number of minus signs. Each has squared norm 2.
const std::array<E8Vector, kE8CodebookSize>& e8_codebook();

struct E8Round {
    std::vector<std::uint8_t> indices;  // per 8-vector, < 240
    std::optional<UqCode> scales_q;     // quantized alpha (scale_bits > 0)
    std::vector<double> scales;         // alpha actually applied
};

struct E8Code {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::uint32_t scale_bits = 2;
    std::size_t pad_len = 0;
    std::vector<E8Round> rounds;
    std::vector<double> residual_sq_norms;  // after each round, original entries only

    DenseMatrix dequantize() const;
    MemoryFootprint footprint(std::uint32_t scalar_bits = 32) const;
};

// scale_bits == 0 keeps alpha at full precision (counted as scalars).
E8Code e8_lvq(const DenseMatrix& w, std::size_t n_rounds, std::uint32_t scale_bits = 2);

} // namespace bqq::baselines
