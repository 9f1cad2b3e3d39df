#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "bqq/codec.hpp"
#include "bqq/io.hpp"
#include "bqq/sweep.hpp"

using namespace bqq;
using namespace bqq::bench;

namespace {

MethodSpec spec_of(Method m) {
    MethodSpec s;
    s.method = m;
    s.params.anneal.n_step = 100;
    s.params.p = 2;
    s.params.rank = 3;
    s.params.k = 16;
    s.params.vec_dim = 4;
    s.params.bits = 3;
    s.params.rounds = 2;
    return s;
}

constexpr Method kAll[] = {Method::Bqq, Method::Uq, Method::Bcq, Method::Svd,
                           Method::SvdUq, Method::Vq, Method::VqUq, Method::E8};

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);)
        out.push_back(line);
    return out;
}

} // namespace

TEST_CASE("method names round trip") {
    for (Method m : kAll)
        CHECK(parse_method(method_name(m)) == m);
    CHECK(!parse_method("jpeg"));
    CHECK(method_list().find("svd_uq") != std::string::npos);
    MethodSpec s;
    s.params.p = 2;
    s.params.l_scale = 0.5;
    CHECK(s.params_string() == "p=2;l_scale=0.5");
}

TEST_CASE("pack and unpack fixed-width values") {
    const std::vector<std::uint32_t> v{0, 5, 7, 1, 2, 6, 3};
    const auto bytes = pack_bits(v, 3);
    CHECK(bytes.size() == 3);
    CHECK(unpack_bits(bytes, v.size(), 3) == v);
    CHECK(pack_bits(v, 0).empty());
    CHECK(unpack_bits({}, 4, 0) == std::vector<std::uint32_t>(4, 0));
    // LSB first: 0b101 then 0b111 occupy bits 3..8.
    CHECK(pack_bits(std::vector<std::uint32_t>{0, 5}, 3)[0] == 0x28);
}

TEST_CASE("code container round trip for every method") {
    const DenseMatrix w = io::gen_lowrank_noise(12, 10, 2, 0.1, 4);
    for (Method m : kAll) {
        CAPTURE(method_name(m));
        const QuantizedMatrix q = quantize_matrix(w, spec_of(m), 3);
        const auto bytes = encode(q);
        const QuantizedMatrix back = decode(bytes);
        CHECK(back.method == m);
        CHECK(back.rows() == 12);
        CHECK(back.standardization == q.standardization);
        // Scalars are stored as f32.
        const DenseMatrix a = q.dequantize(), b = back.dequantize();
        CHECK(mse(a, b) < 1e-10 * std::max(1.0, w.squared_norm()));
        CHECK(back.footprint().total_bits == q.footprint().total_bits);
        // The decoded code is a fixed point of the container.
        CHECK(encode(back) == bytes);
    }
}

TEST_CASE("bqq container layout") {
    const DenseMatrix w = io::gen_gaussian(6, 5, 1);
    MethodSpec s = spec_of(Method::Bqq);
    s.params.p = 1;
    QuantizeOptions opts;
    opts.standardize = false;
    const QuantizedMatrix q = quantize_matrix(w, s, 0, opts);
    const auto bytes = encode(q);
    const std::size_t l = intermediate_dim(6, 5);
    const std::size_t header = 4 + 2 + 1 + 1 + 16;
    const std::size_t payload = 8 + 4 * 4 + (6 * l + 7) / 8 + (l * 5 + 7) / 8;
    CHECK(bytes.size() == header + payload);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "BQQC");
    CHECK(bytes[6] == 0);  // method
    CHECK(bytes[7] == 0);  // no standardization record
}

TEST_CASE("grouped codes survive the container") {
    const DenseMatrix w = io::gen_gaussian(9, 7, 2);
    QuantizeOptions opts;
    opts.group_rows = 4;
    opts.group_cols = 3;
    for (Method m : {Method::Bqq, Method::Uq, Method::Bcq}) {
        const QuantizedMatrix q = quantize_matrix(w, spec_of(m), 5, opts);
        CHECK(q.code.blocks.size() == 9);
        const QuantizedMatrix back = decode(encode(q));
        CHECK(back.code.blocks.size() == 9);
        CHECK(mse(q.dequantize(), back.dequantize()) < 1e-10);
    }
}

TEST_CASE("code container rejects malformed input") {
    const auto good = encode(quantize_matrix(io::gen_gaussian(4, 4, 0), spec_of(Method::Uq), 0));
    auto bad = good;
    bad[0] = 'x';
    CHECK_THROWS_AS(decode(bad), io::ParseError);
    bad = good;
    bad[6] = 42;
    CHECK_THROWS_AS(decode(bad), io::ParseError);
    bad = good;
    bad.pop_back();
    CHECK_THROWS_AS(decode(bad), io::ParseError);
    bad = good;
    bad.push_back(0);
    CHECK_THROWS_AS(decode(bad), io::ParseError);
    bad = good;
    bad[8] = 0xff;  // rows: many more blocks than bytes
    bad[16] = 1;
    CHECK_THROWS_AS(decode(bad), io::ParseError);
}

TEST_CASE("config parsing expands grids") {
    const auto cfg = parse_config(
        "# trade-off sweep\n"
        "gen.kind = lowrank\n"
        "gen.rows = 16\n"
        "gen.cols = 12\n"
        "methods = bqq, uq\n"
        "bqq.p = 1, 2\n"
        "bqq.l_scale = 0.5, 1\n"
        "uq.bits = 2,3,4   # trailing comment\n"
        "anneal.steps = 10\n"
        "seeds = 1, 2\n"
        "record_timing = false\n");
    CHECK(cfg.input.gen_kind == "lowrank");
    CHECK(cfg.input.gen_rows == 16);
    REQUIRE(cfg.points.size() == 7);
    CHECK(cfg.points[0].params_string() == "p=1;l_scale=0.5");
    CHECK(cfg.points[3].params_string() == "p=2;l_scale=1");
    CHECK(cfg.points[3].params.anneal.n_step == 10);
    CHECK(cfg.points[6].params_string() == "bits=4");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2});
    CHECK(!cfg.record_timing);
}

TEST_CASE("config errors name the line") {
    auto message = [](const std::string& text) -> std::string {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return e.what();
        }
        return {};
    };
    CHECK(message("methods = uq\nuq.bitz = 2\n").find("line 2") != std::string::npos);
    CHECK(message("methods = uq\nuq.bitz = 2\n").find("unknown key") != std::string::npos);
    CHECK(message("methods = uq\nseeds = 1\nseeds = 2\n").find("duplicate") != std::string::npos);
    CHECK(message("methods = uq\nuq.bits = two\n").find("line 2") != std::string::npos);
    CHECK(message("methods = uq\nuq.bits = 0\n").find("line 2") != std::string::npos);
    CHECK(message("methods = jpeg\n").find("unknown method") != std::string::npos);
    CHECK(message("methods = uq\nbcq.p = 2\n").find("not listed") != std::string::npos);
    CHECK(!message("seeds = 1\n").empty());
    CHECK(!message("methods = uq\njunk line\n").empty());
    CHECK(!message("methods = uq\nanneal.t_fin = 0.5\n").empty());
    CHECK(!message("methods = uq\ninput.path = a.csv\ngen.rows = 3\n").empty());
    CHECK(!message("methods = uq\nrecord_timing = maybe\n").empty());
    CHECK(!message("methods = uq\nseeds = 1,,2\n").empty());
}

TEST_CASE("sweep records mirror the parameter grid") {
    auto cfg = parse_config("methods = bqq\nbqq.p = 1, 2\nbqq.l_scale = 0.5, 1\nanneal.steps = 50\nseeds = 0, 1\n"
                            "record_timing = false\n");
    const DenseMatrix w = io::gen_gaussian(16, 16, 0);
    const auto records = run_sweep(cfg, w, 1);
    REQUIRE(records.size() == 8);
    for (std::size_t i = 1; i < records.size(); ++i)
        CHECK(records[i - 1].memory_bits <= records[i].memory_bits);
    for (const auto& r : records) {
        CHECK(!r.error);
        CHECK(r.memory_bits > 0);
        CHECK(r.mse >= 0.0);
        CHECK(r.wall_time_ms == 0);
    }
    // 16x16 with l = 4 or 8, p = 1 or 2.
    CHECK(records.front().memory_bits == bqq_footprint(16, 16, 4, 1).total_bits);
    CHECK(records.back().memory_bits == bqq_footprint(16, 16, 8, 2).total_bits);
}

TEST_CASE("sweep on a constant matrix is exact for uq and bcq") {
    auto cfg = parse_config("methods = uq, bcq\nuq.bits = 2\nbcq.p = 2\n");
    const auto records = run_sweep(cfg, DenseMatrix(8, 8, 3.0), 1);
    REQUIRE(records.size() == 2);
    for (const auto& r : records)
        CHECK(r.mse == 0.0);
}

TEST_CASE("sweep marks failing cells and continues") {
    auto cfg = parse_config("methods = svd, uq\nsvd.rank = 2, 50\nrecord_timing = false\n");
    const auto records = run_sweep(cfg, io::gen_gaussian(8, 8, 1), 1);
    REQUIRE(records.size() == 3);
    int errors = 0;
    for (const auto& r : records)
        errors += r.error.has_value();
    CHECK(errors == 1);
    const auto csv = records_to_csv(records);
    CHECK(csv.find("ERROR") != std::string::npos);
    CHECK(records_to_json(records).find("\"error\"") != std::string::npos);
}

TEST_CASE("sweep output does not depend on the worker count") {
    auto cfg = parse_config("methods = bqq, uq, vq, e8\nbqq.p = 1, 2\nanneal.steps = 40\nvq.k = 8\nseeds = 0, 1, 2\n"
                            "record_timing = false\n");
    const DenseMatrix w = io::gen_lowrank_noise(12, 16, 2, 0.1, 7);
    const auto one = records_to_csv(run_sweep(cfg, w, 1));
    const auto four = records_to_csv(run_sweep(cfg, w, 4));
    CHECK(one == four);
    CHECK(one == records_to_csv(run_sweep(cfg, w, 1)));
}

TEST_CASE("csv and json carry identical records") {
    auto cfg = parse_config("methods = bqq, bcq, svd_uq\nanneal.steps = 30\nseeds = 4\noriginal_scale_mse = true\n"
                            "record_timing = false\n");
    const DenseMatrix w = io::gen_gaussian(10, 10, 3);
    const auto records = run_sweep(cfg, w, 2);
    const auto lines = split_lines(records_to_csv(records, true));
    REQUIRE(lines.size() == records.size() + 1);
    CHECK(lines[0] == "method,params,seed,memory_bits,mse,wall_time_ms,mse_original");
    const auto arr = nlohmann::json::parse(records_to_json(records));
    REQUIRE(arr.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::vector<std::string> fields;
        std::stringstream ss(lines[i + 1]);
        for (std::string f; std::getline(ss, f, ',');)
            fields.push_back(f);
        REQUIRE(fields.size() == 7);
        CHECK(fields[0] == arr[i]["method"].get<std::string>());
        CHECK(fields[1] == arr[i]["params"].get<std::string>());
        CHECK(std::stoull(fields[2]) == arr[i]["seed"].get<std::uint64_t>());
        CHECK(std::stoull(fields[3]) == arr[i]["memory_bits"].get<std::uint64_t>());
        CHECK(std::stod(fields[4]) == arr[i]["mse"].get<double>());
        CHECK(std::stod(fields[6]) == arr[i]["mse_original"].get<double>());
        // Original-scale error is the standardized error times the variance.
        const double var = std::pow(standardize(w).record.std, 2);
        CHECK(arr[i]["mse_original"].get<double>() == doctest::Approx(arr[i]["mse"].get<double>() * var));
    }
}

TEST_CASE("sweep footprints match the per-block sum") {
    auto cfg = parse_config("methods = uq\nuq.bits = 2\ngroup.rows = 4\ngroup.cols = 5\n");
    const DenseMatrix w = io::gen_gaussian(10, 10, 0);
    const auto records = run_sweep(cfg, w, 1);
    REQUIRE(records.size() == 1);
    // Nine blocks (4+4+2 rows, 5+5 cols): 2 bits per entry plus two scalars each.
    CHECK(records[0].memory_bits == 200u + 6 * 2 * 32);
    CHECK(records[0].params == "bits=2;group=4x5");
}

TEST_CASE("worker count from the environment") {
    setenv("BQQ_THREADS", "3", 1);
    CHECK(worker_count_from_env() == 3);
    setenv("BQQ_THREADS", "zero", 1);
    CHECK(worker_count_from_env() >= 1);
    unsetenv("BQQ_THREADS");
    CHECK(worker_count_from_env() >= 1);
}

TEST_CASE("generated inputs") {
    InputSpec s;
    s.gen_kind = "cities";
    s.gen_rows = 6;
    const DenseMatrix d = generate(s);
    CHECK(d.rows() == 6);
    CHECK(d.cols() == 6);
    s.gen_kind = "lowrank";
    s.gen_rows = 5;
    s.gen_cols = 4;
    s.gen_rank = 2;
    CHECK(generate(s).cols() == 4);
}
