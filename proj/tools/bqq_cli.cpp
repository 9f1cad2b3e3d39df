#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bqq/bqq.hpp"
#include "bqq/codec.hpp"
#include "bqq/io.hpp"
#include "bqq/svd.hpp"
#include "bqq/sweep.hpp"

using namespace bqq;
using namespace bqq::bench;
using json = nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AnnealFlags {
    AnnealParams params;
    void add(CLI::App* app) {
        app->add_option("--steps", params.n_step, "AMFD steps");
        app->add_option("--t-init", params.t_init, "initial temperature");
        app->add_option("--t-fin", params.t_fin, "final temperature");
        app->add_option("--eta", params.eta, "step size");
        app->add_option("--zeta", params.zeta, "momentum");
    }
};

std::optional<io::MatrixFormat> format_flag(const std::string& name) {
    if (name.empty())
        return std::nullopt;
    auto f = io::parse_format(name);
    if (!f)
        throw UsageError("unknown matrix format '" + name + "' (raw, csv, fvecs, tsplib)");
    return f;
}

json footprint_json(const MemoryFootprint& f) {
    json j;
    j["binary_bits"] = f.binary_bits;
    j["scalar_count"] = f.scalar_count;
    j["scalar_bits_each"] = f.scalar_bits_each;
    j["total_bits"] = f.total_bits;
    j["kilobytes"] = f.kilobytes();
    return j;
}

json counts_json(const OpCounts& c, const OpWeights& w) {
    json j;
    j["and"] = c.and_ops;
    j["add"] = c.add_ops;
    j["mul"] = c.mul_ops;
    j["weighted"] = c.weighted(w);
    return j;
}

// --- quantize

struct QuantizeArgs {
    std::string input, input_format, method, output;
    MethodParams params;
    AnnealFlags anneal;
    std::uint64_t seed = 0;
    std::size_t group_rows = 0, group_cols = 0;
    std::uint32_t scalar_bits = 32;
    bool no_standardize = false;
};

int cmd_quantize(const QuantizeArgs& a) {
    const auto method = parse_method(a.method);
    if (!method)
        throw UsageError("unknown method '" + a.method + "'; available: " + method_list());
    MethodSpec spec{*method, a.params};
    spec.params.anneal = a.anneal.params;
    spec.params.anneal.validate();

    const DenseMatrix w = io::load_matrix(a.input, format_flag(a.input_format));
    QuantizeOptions opts;
    opts.group_rows = a.group_rows;
    opts.group_cols = a.group_cols;
    opts.standardize = !a.no_standardize;
    const QuantizedMatrix q = quantize_matrix(w, spec, a.seed, opts);

    const auto bytes = encode(q);
    io::write_file(a.output, bytes);
    // Report the error of what was actually written (f32 scalars).
    const QuantizedMatrix stored = decode(bytes);
    const DenseMatrix approx = stored.dequantize();

    json j;
    j["method"] = method_name(spec.method);
    j["params"] = spec.params_string();
    j["seed"] = a.seed;
    j["rows"] = w.rows();
    j["cols"] = w.cols();
    j["group_rows"] = q.code.group_rows;
    j["group_cols"] = q.code.group_cols;
    j["blocks"] = q.code.blocks.size();
    j["footprint"] = footprint_json(q.footprint(a.scalar_bits));
    j["mse"] = mse(w, approx);
    if (q.standardization) {
        const Standardized st = standardize(w);
        j["mse_standardized"] = mse(st.matrix, stored.dequantize_standardized());
    } else {
        j["mse_standardized"] = j["mse"];
    }
    j["code_path"] = a.output;
    j["code_bytes"] = bytes.size();
    const std::string text = j.dump(2) + "\n";
    io::write_text_file(a.output + ".json", text);
    std::cout << text;
    return 0;
}

// --- dequantize

int cmd_dequantize(const std::string& input, const std::string& output, const std::string& fmt) {
    const QuantizedMatrix q = load_code(input);
    io::save_matrix(output, q.dequantize(), format_flag(fmt));
    return 0;
}

// --- sweep

struct SweepArgs {
    std::string config, format, output;
    std::optional<std::size_t> steps;
    bool no_timing = false;
};

int cmd_sweep(const SweepArgs& a) {
    BenchmarkConfig cfg = load_config(a.config);
    if (!a.format.empty()) {
        if (a.format == "csv")
            cfg.output_format = OutputFormat::Csv;
        else if (a.format == "json")
            cfg.output_format = OutputFormat::Json;
        else
            throw UsageError("--format must be csv or json");
    }
    if (!a.output.empty())
        cfg.output_path = a.output;
    if (a.no_timing)
        cfg.record_timing = false;
    if (a.steps)
        for (auto& p : cfg.points)
            p.params.anneal.n_step = *a.steps;

    const DenseMatrix input = load_input(cfg.input);
    const auto records = run_sweep(cfg, input, worker_count_from_env());
    const std::string text = cfg.output_format == OutputFormat::Csv
                                 ? records_to_csv(records, cfg.original_scale_mse)
                                 : records_to_json(records);
    if (cfg.output_path)
        io::write_text_file(*cfg.output_path, text);
    else
        std::cout << text;
    return 0;
}

// --- bound

struct BoundArgs {
    std::string input, input_format;
    std::optional<std::size_t> l;
    std::uint64_t seed = 0;
    AnnealFlags anneal;
};

int cmd_bound(const BoundArgs& a) {
    const DenseMatrix w = io::load_matrix(a.input, format_flag(a.input_format));
    const std::size_t m = w.rows(), n = w.cols();
    const std::size_t l = a.l.value_or(intermediate_dim(m, n));
    const double bound = error_upper_bound(w, l);
    const Svd svd = jacobi_svd(w.eigen());

    // l expressed as an l_scale so bqq_quantize reproduces it exactly.
    const double l_scale = static_cast<double>(l) * static_cast<double>(m + n) / static_cast<double>(m * n);
    if (intermediate_dim(m, n, l_scale) != l)
        throw std::runtime_error("bound: cannot represent l = " + std::to_string(l) + " as an l_scale");
    std::vector<double> norms;
    const BqqCode code = bqq_quantize(w, 1, l_scale, a.anneal.params, a.seed, &norms);
    const DenseMatrix approx = dequantize(code);

    const BqqStack feasible = sign_svd_stack(w, l);
    const double feasible_err = (w.eigen() - dequantize_stack(feasible)).norm();

    json j;
    j["rows"] = m;
    j["cols"] = n;
    j["l"] = l;
    j["bound"] = bound;
    j["tail"] = tail_norm(svd, l);
    j["sign_svd_error"] = feasible_err;
    j["bqq_error"] = std::sqrt(norms.back());
    j["bqq_mse"] = mse(w, approx);
    j["bound_holds"] = bound >= feasible_err;
    std::cout << j.dump(2) << "\n";
    return 0;
}

// --- cost

int cmd_cost(std::uint64_t m, std::uint64_t n, std::uint64_t l, std::uint64_t d, const OpWeights& w) {
    const CostReport r = inference_cost(m, n, l, d, w);
    json j;
    j["m"] = m;
    j["n"] = n;
    j["l"] = l;
    j["d"] = d;
    j["first_order"] = counts_json(r.first_order, w);
    j["bqq"] = counts_json(r.bqq, w);
    j["ratio"] = r.ratio;
    std::cout << j.dump(2) << "\n";
    return 0;
}

// --- gen

int cmd_gen(const InputSpec& spec, const std::string& output, const std::string& fmt) {
    const auto format = format_flag(fmt).value_or(io::guess_format(output));
    if (spec.gen_kind == "cities" && format == io::MatrixFormat::Tsplib) {
        io::write_text_file(output, io::write_tsplib(io::gen_random_cities(spec.gen_rows, spec.gen_seed)));
        return 0;
    }
    if (format == io::MatrixFormat::Tsplib)
        throw UsageError("only --kind cities can be written as TSPLIB");
    io::save_matrix(output, generate(spec), format);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Binary quadratic quantization toolkit"};
    app.require_subcommand(1);

    QuantizeArgs qa;
    auto* quant = app.add_subcommand("quantize", "quantize a matrix and write a code file plus a JSON summary");
    quant->add_option("--input,-i", qa.input, "input matrix")->required();
    quant->add_option("--input-format", qa.input_format, "raw, csv, fvecs or tsplib (default: from extension)");
    quant->add_option("--method,-m", qa.method, "one of " + method_list())->required();
    quant->add_option("--output,-o", qa.output, "code file; the summary goes to <output>.json")->required();
    quant->add_option("--p", qa.params.p, "stacks (bqq) or rounds (bcq)");
    quant->add_option("--l-scale", qa.params.l_scale, "intermediate dimension scale (bqq)");
    quant->add_option("--bits", qa.params.bits, "bit width (uq, svd_uq, vq_uq)");
    quant->add_option("--rank", qa.params.rank, "rank (svd, svd_uq)");
    quant->add_option("--k", qa.params.k, "codebook size (vq, vq_uq)");
    quant->add_option("--vec-dim", qa.params.vec_dim, "vector length (vq, vq_uq)");
    quant->add_option("--rounds", qa.params.rounds, "residual rounds (e8)");
    quant->add_option("--scale-bits", qa.params.scale_bits, "scale bit width, 0 = full precision (e8)");
    quant->add_option("--n-split", qa.params.n_split, "grid resolution (uq)");
    quant->add_option("--seed", qa.seed);
    quant->add_option("--group-rows", qa.group_rows, "block rows (0 = whole matrix)");
    quant->add_option("--group-cols", qa.group_cols, "block cols (0 = whole matrix)");
    quant->add_option("--scalar-bits", qa.scalar_bits, "bits charged per scalar in the footprint");
    quant->add_flag("--no-standardize", qa.no_standardize, "quantize the raw values");
    qa.anneal.add(quant);

    std::string dq_in, dq_out, dq_fmt;
    auto* deq = app.add_subcommand("dequantize", "reconstruct a matrix from a code file");
    deq->add_option("--input,-i", dq_in, "code file")->required();
    deq->add_option("--output,-o", dq_out, "matrix file")->required();
    deq->add_option("--output-format", dq_fmt, "raw, csv or fvecs (default: from extension)");

    SweepArgs sa;
    auto* sweep = app.add_subcommand("sweep", "run a memory / error trade-off sweep");
    sweep->add_option("--config,-c", sa.config, "config file")->required();
    sweep->add_option("--format", sa.format, "csv or json (overrides the config)");
    sweep->add_option("--output,-o", sa.output, "output file (default: stdout)");
    sweep->add_option("--steps", sa.steps, "override AMFD steps for every bqq point");
    sweep->add_flag("--no-timing", sa.no_timing, "write wall_time_ms as 0");

    BoundArgs ba;
    auto* bound = app.add_subcommand("bound", "error upper bound versus achieved one-stack error");
    bound->add_option("--input,-i", ba.input, "input matrix")->required();
    bound->add_option("--input-format", ba.input_format);
    bound->add_option("--l", ba.l, "intermediate dimension (default round(mn/(m+n)))");
    bound->add_option("--seed", ba.seed);
    ba.anneal.add(bound);

    std::uint64_t cm = 0, cn = 0, cl = 0, cd = 1;
    OpWeights weights;
    auto* cost = app.add_subcommand("cost", "inference operation counts, first-order vs one stack");
    cost->add_option("m", cm)->required()->check(CLI::PositiveNumber);
    cost->add_option("n", cn)->required()->check(CLI::PositiveNumber);
    cost->add_option("l", cl)->required()->check(CLI::PositiveNumber);
    cost->add_option("d", cd)->check(CLI::PositiveNumber);
    cost->add_option("--w-and", weights.w_and);
    cost->add_option("--w-add", weights.w_add);
    cost->add_option("--w-mul", weights.w_mul);

    InputSpec gs;
    std::string gen_out, gen_fmt;
    auto* gen = app.add_subcommand("gen", "write a synthetic matrix");
    gen->add_option("--kind", gs.gen_kind, "gaussian, lowrank or cities")
        ->check(CLI::IsMember({"gaussian", "lowrank", "cities"}));
    gen->add_option("--rows", gs.gen_rows, "rows (city count for cities)")->check(CLI::PositiveNumber);
    gen->add_option("--cols", gs.gen_cols)->check(CLI::PositiveNumber);
    gen->add_option("--rank", gs.gen_rank);
    gen->add_option("--noise", gs.gen_noise);
    gen->add_option("--seed", gs.gen_seed);
    gen->add_option("--output,-o", gen_out)->required();
    gen->add_option("--output-format", gen_fmt, "raw, csv, fvecs or tsplib (default: from extension)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*quant)
            return cmd_quantize(qa);
        if (*deq)
            return cmd_dequantize(dq_in, dq_out, dq_fmt);
        if (*sweep)
            return cmd_sweep(sa);
        if (*bound)
            return cmd_bound(ba);
        if (*cost)
            return cmd_cost(cm, cn, cl, cd, weights);
        if (*gen)
            return cmd_gen(gs, gen_out, gen_fmt);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
