#include "bqq/methods.hpp"

#include <array>
#include <charconv>

namespace bqq::bench {

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 8> kNames{{
    {Method::Bqq, "bqq"},
    {Method::Uq, "uq"},
    {Method::Bcq, "bcq"},
    {Method::Svd, "svd"},
    {Method::SvdUq, "svd_uq"},
    {Method::Vq, "vq"},
    {Method::VqUq, "vq_uq"},
    {Method::E8, "e8"},
}};

std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, ptr};
}

template <class... Fs>
struct Overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

} // namespace

std::string_view method_name(Method m) {
    for (const auto& [id, name] : kNames)
        if (id == m)
            return name;
    return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
    for (const auto& [id, n] : kNames)
        if (n == name)
            return id;
    return std::nullopt;
}

std::string method_list() {
    std::string out;
    for (const auto& [id, name] : kNames) {
        if (!out.empty())
            out += ", ";
        out += name;
    }
    return out;
}

std::string MethodSpec::params_string() const {
    const auto& q = params;
    switch (method) {
    case Method::Bqq:
        return "p=" + std::to_string(q.p) + ";l_scale=" + fmt_double(q.l_scale);
    case Method::Uq:
        return "bits=" + std::to_string(q.bits);
    case Method::Bcq:
        return "p=" + std::to_string(q.p);
    case Method::Svd:
        return "rank=" + std::to_string(q.rank);
    case Method::SvdUq:
        return "rank=" + std::to_string(q.rank) + ";bits=" + std::to_string(q.bits);
    case Method::Vq:
        return "k=" + std::to_string(q.k) + ";vec_dim=" + std::to_string(q.vec_dim);
    case Method::VqUq:
        return "k=" + std::to_string(q.k) + ";vec_dim=" + std::to_string(q.vec_dim) + ";bits=" + std::to_string(q.bits);
    case Method::E8:
        return "rounds=" + std::to_string(q.rounds) + ";scale_bits=" + std::to_string(q.scale_bits);
    }
    return {};
}

AnyCode quantize_block(const MethodSpec& spec, const DenseMatrix& block, std::uint64_t seed) {
    const auto& q = spec.params;
    switch (spec.method) {
    case Method::Bqq:
        return bqq_quantize(block, q.p, q.l_scale, q.anneal, seed);
    case Method::Uq:
        return baselines::uq_grid(block, q.bits, q.n_split);
    case Method::Bcq:
        return baselines::bcq(block, q.p);
    case Method::Svd:
        return baselines::svd_lowrank(block, q.rank);
    case Method::SvdUq:
        return baselines::svd_uq(block, q.rank, q.bits, q.n_split);
    case Method::Vq:
        return baselines::vq_kmeans(block, q.vec_dim, q.k, seed);
    case Method::VqUq:
        return baselines::vq_kmeans(block, q.vec_dim, q.k, seed, q.bits);
    case Method::E8:
        return baselines::e8_lvq(block, q.rounds, q.scale_bits);
    }
    throw MatrixError("quantize_block: unknown method");
}

DenseMatrix dequantize_block(const AnyCode& code) {
    return std::visit(Overloaded{
                          [](const BqqCode& c) { return bqq::dequantize(c); },
                          [](const auto& c) { return c.dequantize(); },
                      },
                      code);
}

MemoryFootprint block_footprint(const AnyCode& code, std::uint32_t scalar_bits) {
    return std::visit([&](const auto& c) { return c.footprint(scalar_bits); }, code);
}

DenseMatrix QuantizedMatrix::dequantize_standardized() const {
    return groupwise_dequantize(code, [](const AnyCode& c) { return dequantize_block(c); });
}

DenseMatrix QuantizedMatrix::dequantize() const {
    DenseMatrix out = dequantize_standardized();
    return standardization ? destandardize(out, *standardization) : out;
}

MemoryFootprint QuantizedMatrix::footprint(std::uint32_t scalar_bits) const {
    MemoryFootprint total = MemoryFootprint::make(0, 0, scalar_bits);
    for (const auto& block : code.blocks)
        total += block_footprint(block, scalar_bits);
    return total;
}

QuantizedMatrix quantize_matrix(const DenseMatrix& w, const MethodSpec& spec, std::uint64_t seed,
                                const QuantizeOptions& opts) {
    if (w.empty())
        throw MatrixError("quantize_matrix: empty input");
    QuantizedMatrix out;
    out.method = spec.method;
    DenseMatrix source = w;
    if (opts.standardize) {
        Standardized st = standardize(w);
        out.standardization = st.record;
        source = std::move(st.matrix);
    }
    const std::size_t gr = opts.group_rows ? opts.group_rows : w.rows();
    const std::size_t gc = opts.group_cols ? opts.group_cols : w.cols();
    out.code = groupwise_quantize(source, gr, gc, seed, [&](const DenseMatrix& block, std::uint64_t block_seed) {
        return quantize_block(spec, block, block_seed);
    });
    return out;
}

} // namespace bqq::bench
