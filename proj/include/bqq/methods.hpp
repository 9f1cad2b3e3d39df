#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bqq/baselines.hpp"
#include "bqq/bqq.hpp"
#include "bqq/grouped.hpp"

namespace bqq::bench {

// Values are the method byte of the code container.
enum class Method : std::uint8_t { Bqq = 0, Uq = 1, Bcq = 2, Svd = 3, SvdUq = 4, Vq = 5, VqUq = 6, E8 = 7 };

std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view name);
// Comma-separated, for usage messages.
std::string method_list();

struct MethodParams {
    std::size_t p = 1;         // bqq stacks, bcq rounds
    double l_scale = 1.0;      // bqq
    std::uint32_t bits = 2;    // uq, svd_uq, vq_uq
    std::size_t rank = 1;      // svd, svd_uq
    std::size_t k = 256;       // vq, vq_uq
    std::size_t vec_dim = 8;   // vq, vq_uq
    std::size_t rounds = 1;    // e8
    std::uint32_t scale_bits = 2;  // e8
    std::size_t n_split = 100;     // uq grid resolution
    AnnealParams anneal;
};

struct MethodSpec {
    Method method = Method::Bqq;
    MethodParams params;

    // Only the parameters the method reads, e.g. "p=2;l_scale=1".
    std::string params_string() const;
};

using AnyCode = std::variant<BqqCode, baselines::UqCode, baselines::BcqCode, baselines::SvdCode, baselines::VqCode,
                             baselines::E8Code>;

AnyCode quantize_block(const MethodSpec& spec, const DenseMatrix& block, std::uint64_t seed);
DenseMatrix dequantize_block(const AnyCode& code);
MemoryFootprint block_footprint(const AnyCode& code, std::uint32_t scalar_bits = 32);

struct QuantizedMatrix {
    Method method = Method::Bqq;
    std::optional<StandardizationRecord> standardization;
    GroupedCode<AnyCode> code;

    std::size_t rows() const { return code.rows; }
    std::size_t cols() const { return code.cols; }
    // In the original scale when a standardization record is present.
    DenseMatrix dequantize() const;
    DenseMatrix dequantize_standardized() const;
    // Sum over blocks; the standardization record is metadata and not counted.
    MemoryFootprint footprint(std::uint32_t scalar_bits = 32) const;
};

struct QuantizeOptions {
    std::size_t group_rows = 0;  // 0 means the full matrix dimension
    std::size_t group_cols = 0;
    bool standardize = true;
};

QuantizedMatrix quantize_matrix(const DenseMatrix& w, const MethodSpec& spec, std::uint64_t seed,
                                const QuantizeOptions& opts = {});

} // namespace bqq::bench
