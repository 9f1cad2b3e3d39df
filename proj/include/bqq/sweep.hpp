#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bqq/io.hpp"
#include "bqq/methods.hpp"

namespace bqq::bench {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct InputSpec {
    std::optional<std::filesystem::path> path;
    std::optional<io::MatrixFormat> format;
    // Used when no path is given: gaussian, lowrank or cities.
    std::string gen_kind = "gaussian";
    std::size_t gen_rows = 128;
    std::size_t gen_cols = 128;
    std::size_t gen_rank = 4;
    double gen_noise = 0.02;
    std::uint64_t gen_seed = 0;
};

enum class OutputFormat { Csv, Json };

struct BenchmarkConfig {
    InputSpec input;
    std::vector<MethodSpec> points;  // expanded parameter grid, in config order
    std::vector<std::uint64_t> seeds{0};
    std::size_t group_rows = 0;
    std::size_t group_cols = 0;
    std::uint32_t scalar_bits = 32;
    std::optional<std::filesystem::path> output_path;
    OutputFormat output_format = OutputFormat::Csv;
    bool record_timing = true;
    bool original_scale_mse = false;
};

// Flat "key = value[, value ...]" lines; '#' starts a comment. Unknown or
// repeated keys and malformed values are errors naming the line.
BenchmarkConfig parse_config(std::string_view text);
BenchmarkConfig load_config(const std::filesystem::path& path);

DenseMatrix load_input(const InputSpec& spec);
DenseMatrix generate(const InputSpec& spec);

struct TradeoffRecord {
    std::string method;
    std::string params;
    std::uint64_t seed = 0;
    std::uint64_t memory_bits = 0;
    double mse = 0.0;                   // standardized units
    std::optional<double> mse_original;  // when requested
    std::int64_t wall_time_ms = 0;
    std::optional<std::string> error;
};

// BQQ_THREADS if set and positive, otherwise the hardware concurrency.
std::size_t worker_count_from_env();

// One record per (point, seed). Cells run on `threads` workers and are
// gathered by cell index, then stably sorted by (method, memory_bits).
std::vector<TradeoffRecord> run_sweep(const BenchmarkConfig& config, const DenseMatrix& input, std::size_t threads);

std::string records_to_csv(const std::vector<TradeoffRecord>& records, bool original_scale = false);
std::string records_to_json(const std::vector<TradeoffRecord>& records);

// Shortest round-trip decimal form.
std::string format_double(double v);

} // namespace bqq::bench
