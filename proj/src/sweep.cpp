#include "bqq/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <map>
#include <set>
#include <thread>

#include <json.hpp>

namespace bqq::bench {

namespace {

struct Entry {
    std::vector<std::string> values;
    std::size_t line = 0;
    bool used = false;
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

class EntryTable {
public:
    explicit EntryTable(std::string_view text) {
        std::size_t lineno = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto nl = text.find('\n', pos);
            auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            line = trim(line);
            if (!line.empty())
                add(line, lineno);
            if (nl == std::string_view::npos)
                break;
            pos = nl + 1;
        }
    }

    Entry* find(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end())
            return nullptr;
        it->second.used = true;
        return &it->second;
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    void reject_unused() const {
        for (const auto& [key, e] : entries_)
            if (!e.used)
                throw ConfigError("config line " + std::to_string(e.line) + ": unknown key '" + key + "'");
    }

    const std::map<std::string, Entry>& entries() const { return entries_; }

private:
    void add(std::string_view line, std::size_t lineno) {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        Entry e;
        e.line = lineno;
        auto rest = line.substr(eq + 1);
        while (true) {
            const auto comma = rest.find(',');
            const auto item = trim(rest.substr(0, comma));
            if (item.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty value for '" + key + "'");
            e.values.emplace_back(item);
            if (comma == std::string_view::npos)
                break;
            rest = rest.substr(comma + 1);
        }
        if (!entries_.emplace(key, std::move(e)).second)
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }

    std::map<std::string, Entry> entries_;
};

[[noreturn]] void bad_value(const Entry& e, const std::string& key, const std::string& value, const char* expected) {
    throw ConfigError("config line " + std::to_string(e.line) + ": '" + key + "' value '" + value + "' is not " +
                      expected);
}

std::uint64_t to_uint(const Entry& e, const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        bad_value(e, key, v, "a non-negative integer");
    return out;
}

double to_double(const Entry& e, const std::string& key, const std::string& v) {
    double out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
        bad_value(e, key, v, "a number");
    return out;
}

bool to_bool(const Entry& e, const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    bad_value(e, key, v, "a boolean");
}

const std::string& single(const Entry& e, const std::string& key) {
    if (e.values.size() != 1)
        throw ConfigError("config line " + std::to_string(e.line) + ": '" + key + "' takes a single value");
    return e.values.front();
}

std::vector<std::uint64_t> uint_list(EntryTable& t, const std::string& key, std::vector<std::uint64_t> fallback,
                                     std::uint64_t min_value) {
    Entry* e = t.find(key);
    if (!e)
        return fallback;
    std::vector<std::uint64_t> out;
    for (const auto& v : e->values) {
        const auto x = to_uint(*e, key, v);
        if (x < min_value)
            bad_value(*e, key, v, min_value == 1 ? "at least 1" : "in range");
        out.push_back(x);
    }
    return out;
}

std::vector<double> positive_list(EntryTable& t, const std::string& key, std::vector<double> fallback) {
    Entry* e = t.find(key);
    if (!e)
        return fallback;
    std::vector<double> out;
    for (const auto& v : e->values) {
        const double x = to_double(*e, key, v);
        if (!(x > 0.0))
            bad_value(*e, key, v, "positive");
        out.push_back(x);
    }
    return out;
}

template <class T, class Fn>
void optional_single(EntryTable& t, const std::string& key, T& target, Fn&& convert) {
    if (Entry* e = t.find(key))
        target = convert(*e, key, single(*e, key));
}

std::string fmt_double_impl(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, ptr};
}

} // namespace

std::string format_double(double v) { return fmt_double_impl(v); }

BenchmarkConfig parse_config(std::string_view text) {
    EntryTable t(text);
    BenchmarkConfig cfg;

    // Input.
    if (Entry* e = t.find("input.path"))
        cfg.input.path = single(*e, "input.path");
    if (Entry* e = t.find("input.format")) {
        const auto& v = single(*e, "input.format");
        cfg.input.format = io::parse_format(v);
        if (!cfg.input.format)
            bad_value(*e, "input.format", v, "one of raw, csv, fvecs, tsplib");
    }
    const bool has_gen = t.has("gen.kind") || t.has("gen.rows") || t.has("gen.cols") || t.has("gen.rank") ||
                         t.has("gen.noise") || t.has("gen.seed");
    if (cfg.input.path && has_gen)
        throw ConfigError("config: input.path and gen.* are mutually exclusive");
    if (Entry* e = t.find("gen.kind")) {
        const auto& v = single(*e, "gen.kind");
        if (v != "gaussian" && v != "lowrank" && v != "cities")
            bad_value(*e, "gen.kind", v, "one of gaussian, lowrank, cities");
        cfg.input.gen_kind = v;
    }
    optional_single(t, "gen.rows", cfg.input.gen_rows, to_uint);
    optional_single(t, "gen.cols", cfg.input.gen_cols, to_uint);
    optional_single(t, "gen.rank", cfg.input.gen_rank, to_uint);
    optional_single(t, "gen.noise", cfg.input.gen_noise, to_double);
    optional_single(t, "gen.seed", cfg.input.gen_seed, to_uint);
    if (cfg.input.gen_rows == 0 || cfg.input.gen_cols == 0)
        throw ConfigError("config: gen.rows and gen.cols must be positive");

    // Shared quantizer settings.
    AnnealParams anneal;
    optional_single(t, "anneal.steps", anneal.n_step, to_uint);
    optional_single(t, "anneal.t_init", anneal.t_init, to_double);
    optional_single(t, "anneal.t_fin", anneal.t_fin, to_double);
    optional_single(t, "anneal.eta", anneal.eta, to_double);
    optional_single(t, "anneal.zeta", anneal.zeta, to_double);
    try {
        anneal.validate();
    } catch (const std::exception& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
    }
    std::size_t n_split = 100;
    optional_single(t, "uq.n_split", n_split, to_uint);
    if (n_split < 2)
        throw ConfigError("config: uq.n_split must be at least 2");

    // Methods and their parameter grids.
    Entry* methods = t.find("methods");
    if (!methods)
        throw ConfigError("config: 'methods' is required");
    std::set<std::string> listed;
    for (const auto& name : methods->values) {
        const auto m = parse_method(name);
        if (!m)
            throw ConfigError("config line " + std::to_string(methods->line) + ": unknown method '" + name +
                              "' (known: " + method_list() + ")");
        if (!listed.insert(name).second)
            throw ConfigError("config line " + std::to_string(methods->line) + ": method '" + name + "' listed twice");
    }
    for (const auto& [key, e] : t.entries()) {
        const auto dot = key.find('.');
        if (dot == std::string::npos)
            continue;
        const std::string prefix = key.substr(0, dot);
        if (parse_method(prefix) && !listed.count(prefix))
            throw ConfigError("config line " + std::to_string(e.line) + ": '" + key +
                              "' configures a method not listed in 'methods'");
    }

    for (const auto& name : methods->values) {
        const Method m = *parse_method(name);
        MethodParams base;
        base.anneal = anneal;
        base.n_split = n_split;
        auto push = [&](MethodParams q) { cfg.points.push_back({m, q}); };
        switch (m) {
        case Method::Bqq:
            for (auto p : uint_list(t, "bqq.p", {1}, 1))
                for (double ls : positive_list(t, "bqq.l_scale", {1.0})) {
                    auto q = base;
                    q.p = p;
                    q.l_scale = ls;
                    push(q);
                }
            break;
        case Method::Uq:
            for (auto b : uint_list(t, "uq.bits", {2}, 1)) {
                auto q = base;
                q.bits = static_cast<std::uint32_t>(b);
                push(q);
            }
            break;
        case Method::Bcq:
            for (auto p : uint_list(t, "bcq.p", {2}, 1)) {
                auto q = base;
                q.p = p;
                push(q);
            }
            break;
        case Method::Svd:
            for (auto r : uint_list(t, "svd.rank", {1}, 1)) {
                auto q = base;
                q.rank = r;
                push(q);
            }
            break;
        case Method::SvdUq:
            for (auto r : uint_list(t, "svd_uq.rank", {1}, 1))
                for (auto b : uint_list(t, "svd_uq.bits", {2}, 1)) {
                    auto q = base;
                    q.rank = r;
                    q.bits = static_cast<std::uint32_t>(b);
                    push(q);
                }
            break;
        case Method::Vq:
            for (auto k : uint_list(t, "vq.k", {256}, 1))
                for (auto d : uint_list(t, "vq.vec_dim", {8}, 1)) {
                    auto q = base;
                    q.k = k;
                    q.vec_dim = d;
                    push(q);
                }
            break;
        case Method::VqUq:
            for (auto k : uint_list(t, "vq_uq.k", {256}, 1))
                for (auto d : uint_list(t, "vq_uq.vec_dim", {8}, 1))
                    for (auto b : uint_list(t, "vq_uq.bits", {2}, 1)) {
                        auto q = base;
                        q.k = k;
                        q.vec_dim = d;
                        q.bits = static_cast<std::uint32_t>(b);
                        push(q);
                    }
            break;
        case Method::E8:
            for (auto r : uint_list(t, "e8.rounds", {1}, 1))
                for (auto b : uint_list(t, "e8.scale_bits", {2}, 0)) {
                    auto q = base;
                    q.rounds = r;
                    q.scale_bits = static_cast<std::uint32_t>(b);
                    push(q);
                }
            break;
        }
    }

    // Run settings.
    cfg.seeds = uint_list(t, "seeds", {0}, 0);
    optional_single(t, "group.rows", cfg.group_rows, to_uint);
    optional_single(t, "group.cols", cfg.group_cols, to_uint);
    if (Entry* e = t.find("scalar_bits")) {
        const auto& v = single(*e, "scalar_bits");
        const auto b = to_uint(*e, "scalar_bits", v);
        if (b == 0 || b > 64)
            bad_value(*e, "scalar_bits", v, "in [1, 64]");
        cfg.scalar_bits = static_cast<std::uint32_t>(b);
    }
    if (Entry* e = t.find("output.path"))
        cfg.output_path = single(*e, "output.path");
    if (Entry* e = t.find("output.format")) {
        const auto& v = single(*e, "output.format");
        if (v == "csv")
            cfg.output_format = OutputFormat::Csv;
        else if (v == "json")
            cfg.output_format = OutputFormat::Json;
        else
            bad_value(*e, "output.format", v, "csv or json");
    }
    optional_single(t, "record_timing", cfg.record_timing, to_bool);
    optional_single(t, "original_scale_mse", cfg.original_scale_mse, to_bool);

    t.reject_unused();
    if (cfg.points.empty())
        throw ConfigError("config: no method points");
    return cfg;
}

BenchmarkConfig load_config(const std::filesystem::path& path) { return parse_config(io::read_text_file(path)); }

DenseMatrix generate(const InputSpec& spec) {
    if (spec.gen_kind == "gaussian")
        return io::gen_gaussian(spec.gen_rows, spec.gen_cols, spec.gen_seed);
    if (spec.gen_kind == "lowrank")
        return io::gen_lowrank_noise(spec.gen_rows, spec.gen_cols, spec.gen_rank, spec.gen_noise, spec.gen_seed);
    if (spec.gen_kind == "cities")
        return io::distance_matrix(io::gen_random_cities(spec.gen_rows, spec.gen_seed));
    throw ConfigError("unknown generator '" + spec.gen_kind + "'");
}

DenseMatrix load_input(const InputSpec& spec) {
    if (spec.path)
        return io::load_matrix(*spec.path, spec.format);
    return generate(spec);
}

std::size_t worker_count_from_env() {
    if (const char* env = std::getenv("BQQ_THREADS")) {
        std::size_t n = 0;
        const std::string_view s(env);
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
        if (ec == std::errc() && ptr == s.data() + s.size() && n > 0)
            return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<TradeoffRecord> run_sweep(const BenchmarkConfig& config, const DenseMatrix& input, std::size_t threads) {
    struct Cell {
        const MethodSpec* spec;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& spec : config.points)
        for (auto seed : config.seeds)
            cells.push_back({&spec, seed});

    const Standardized st = standardize(input);
    QuantizeOptions opts;
    opts.group_rows = config.group_rows;
    opts.group_cols = config.group_cols;
    opts.standardize = false;

    std::vector<TradeoffRecord> records(cells.size());
    auto run_cell = [&](std::size_t i) {
        const Cell& c = cells[i];
        TradeoffRecord& rec = records[i];
        rec.method = method_name(c.spec->method);
        rec.params = c.spec->params_string();
        if (config.group_rows || config.group_cols)
            rec.params += ";group=" + std::to_string(config.group_rows ? config.group_rows : input.rows()) + "x" +
                          std::to_string(config.group_cols ? config.group_cols : input.cols());
        rec.seed = c.seed;
        const auto start = std::chrono::steady_clock::now();
        try {
            const QuantizedMatrix q = quantize_matrix(st.matrix, *c.spec, c.seed, opts);
            const DenseMatrix approx = q.dequantize_standardized();
            rec.memory_bits = q.footprint(config.scalar_bits).total_bits;
            rec.mse = mse(st.matrix, approx);
            if (config.original_scale_mse)
                rec.mse_original = mse(input, destandardize(approx, st.record));
        } catch (const std::exception& ex) {
            rec.error = ex.what();
            rec.memory_bits = 0;
            rec.mse = 0.0;
        }
        if (config.record_timing)
            rec.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now() - start)
                                   .count();
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, cells.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++)
                    run_cell(i);
            });
    }

    std::stable_sort(records.begin(), records.end(), [](const TradeoffRecord& a, const TradeoffRecord& b) {
        if (a.method != b.method)
            return a.method < b.method;
        return a.memory_bits < b.memory_bits;
    });
    return records;
}

std::string records_to_csv(const std::vector<TradeoffRecord>& records, bool original_scale) {
    std::string out = "method,params,seed,memory_bits,mse,wall_time_ms";
    if (original_scale)
        out += ",mse_original";
    out += "\n";
    for (const auto& r : records) {
        out += r.method + "," + r.params + "," + std::to_string(r.seed) + "," + std::to_string(r.memory_bits) + ",";
        out += r.error ? std::string("ERROR") : format_double(r.mse);
        out += "," + std::to_string(r.wall_time_ms);
        if (original_scale)
            out += "," + (r.error || !r.mse_original ? std::string("ERROR") : format_double(*r.mse_original));
        out += "\n";
    }
    return out;
}

std::string records_to_json(const std::vector<TradeoffRecord>& records) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["method"] = r.method;
        j["params"] = r.params;
        j["seed"] = r.seed;
        j["memory_bits"] = r.memory_bits;
        if (r.error)
            j["mse"] = nullptr;
        else
            j["mse"] = r.mse;
        j["wall_time_ms"] = r.wall_time_ms;
        if (r.mse_original && !r.error)
            j["mse_original"] = *r.mse_original;
        if (r.error)
            j["error"] = *r.error;
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

} // namespace bqq::bench
