#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bqq/matrix.hpp"

namespace bqq::io {

// Malformed input. The message names the byte or line offset.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// --- fvecs: per record, int32 LE dim then dim float32 LE values.

struct FvecsRecordSet {
    std::optional<std::uint32_t> dim;  // unset for an empty file
    std::vector<std::vector<float>> vectors;
};

FvecsRecordSet parse_fvecs(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_fvecs(const FvecsRecordSet& set);
// One row per vector.
DenseMatrix fvecs_to_matrix(const FvecsRecordSet& set, std::size_t max_rows = 0);

// --- TSPLIB, EUC_2D only.

struct TspInstance {
    std::string name;
    std::vector<std::pair<double, double>> node_coords;
};

TspInstance parse_tsplib(std::string_view text);
std::string write_tsplib(const TspInstance& inst);
// Symmetric, zero diagonal, nint(Euclidean distance).
DenseMatrix distance_matrix(const TspInstance& inst);

// --- Delimited text: one matrix row per line, comma and/or whitespace separated.

DenseMatrix parse_delimited(std::string_view text);
std::string write_delimited(const DenseMatrix& m, char sep = ',');

// --- Raw binary matrix:
//   bytes 0-3  magic "BQQM"
//   bytes 4-5  version (uint16 LE, 1)
//   bytes 6-7  element width in bytes (uint16 LE, 8)
//   bytes 8-15 rows (uint64 LE), bytes 16-23 cols (uint64 LE)
//   then rows*cols float64 LE, row-major.

inline constexpr std::size_t kRawHeaderSize = 24;

DenseMatrix parse_raw_matrix(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_raw_matrix(const DenseMatrix& m);

// --- Synthetic sources.

DenseMatrix gen_gaussian(std::size_t m, std::size_t n, std::uint64_t seed);
// sum of `rank` outer products of standard normal vectors + noise_std * N(0,1).
DenseMatrix gen_lowrank_noise(std::size_t m, std::size_t n, std::size_t rank, double noise_std, std::uint64_t seed);
// Uniform coordinates in [0, 1000)^2.
TspInstance gen_random_cities(std::size_t n, std::uint64_t seed);

enum class MatrixFormat { Raw, Delimited, Fvecs, Tsplib };

std::optional<MatrixFormat> parse_format(std::string_view name);
// From the extension: .bqqm/.bin -> raw, .csv/.txt -> delimited, .fvecs, .tsp.
MatrixFormat guess_format(const std::filesystem::path& path);
DenseMatrix load_matrix(const std::filesystem::path& path, std::optional<MatrixFormat> format = std::nullopt);
void save_matrix(const std::filesystem::path& path, const DenseMatrix& m,
                 std::optional<MatrixFormat> format = std::nullopt);

// Little-endian primitives shared with the code container.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t>& buffer() { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::string context)
        : bytes_(bytes), context_(std::move(context)) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::span<const std::uint8_t> bytes(std::size_t n);

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    [[noreturn]] void fail(const std::string& what) const;

private:
    void need(std::size_t n) const;

    std::span<const std::uint8_t> bytes_;
    std::string context_;
    std::size_t pos_ = 0;
};

} // namespace bqq::io
