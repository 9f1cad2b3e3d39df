#include "bqq/codec.hpp"

#include <limits>

#include "bqq/io.hpp"

namespace bqq::bench {

using io::ByteReader;
using io::ByteWriter;

namespace {

constexpr std::uint16_t kVersion = 1;

void put_u32(ByteWriter& out, std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max())
        throw io::IoError(std::string("encode: ") + what + " does not fit in 32 bits");
    out.u32(static_cast<std::uint32_t>(v));
}

void put_bits(ByteWriter& out, const BitMatrix& b) { out.bytes(b.to_bytes()); }

BitMatrix get_bits(ByteReader& in, std::size_t rows, std::size_t cols) {
    return BitMatrix::from_bytes(rows, cols, in.bytes((rows * cols + 7) / 8));
}

void put_f32_matrix(ByteWriter& out, const RowMajorMatrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
        out.f32(static_cast<float>(m.data()[i]));
}

RowMajorMatrix get_f32_matrix(ByteReader& in, std::size_t rows, std::size_t cols) {
    RowMajorMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = in.f32();
    return m;
}

double get_scalar(ByteReader& in) {
    const double v = in.f32();
    if (!std::isfinite(v))
        in.fail("non-finite scalar");
    return v;
}

// --- uq

void put_uq(ByteWriter& out, const baselines::UqCode& c) {
    out.u8(static_cast<std::uint8_t>(c.bits));
    out.f32(static_cast<float>(c.scale));
    out.f32(static_cast<float>(c.bias));
    out.bytes(pack_bits(c.indices, c.bits));
}

baselines::UqCode get_uq(ByteReader& in, std::size_t rows, std::size_t cols) {
    baselines::UqCode c;
    c.rows = rows;
    c.cols = cols;
    c.bits = in.u8();
    if (c.bits == 0 || c.bits > 24)
        in.fail("uq bit width out of range");
    c.scale = get_scalar(in);
    c.bias = get_scalar(in);
    c.indices = unpack_bits(in.bytes(packed_size(rows * cols, c.bits)), rows * cols, c.bits);
    return c;
}

// --- per method

void put_block(ByteWriter& out, Method method, const AnyCode& code) {
    switch (method) {
    case Method::Bqq: {
        const auto& c = std::get<BqqCode>(code);
        put_u32(out, c.l, "l");
        put_u32(out, c.p(), "p");
        for (const auto& s : c.stacks) {
            out.f32(static_cast<float>(s.scales.r));
            out.f32(static_cast<float>(s.scales.s));
            out.f32(static_cast<float>(s.scales.t));
        }
        out.f32(static_cast<float>(c.u_total));
        for (const auto& s : c.stacks) {
            put_bits(out, s.y);
            put_bits(out, s.z);
        }
        return;
    }
    case Method::Uq:
        put_uq(out, std::get<baselines::UqCode>(code));
        return;
    case Method::Bcq: {
        const auto& c = std::get<baselines::BcqCode>(code);
        put_u32(out, c.scales.size(), "p");
        for (double a : c.scales)
            out.f32(static_cast<float>(a));
        for (const auto& b : c.bases)
            put_bits(out, b);
        return;
    }
    case Method::Svd:
    case Method::SvdUq: {
        const auto& c = std::get<baselines::SvdCode>(code);
        put_u32(out, c.rank, "rank");
        if (method == Method::Svd) {
            put_f32_matrix(out, c.left);
            put_f32_matrix(out, c.right);
        } else {
            if (!c.left_q || !c.right_q)
                throw io::IoError("encode: svd_uq code without quantized factors");
            put_uq(out, *c.left_q);
            put_uq(out, *c.right_q);
        }
        return;
    }
    case Method::Vq:
    case Method::VqUq: {
        const auto& c = std::get<baselines::VqCode>(code);
        put_u32(out, c.vec_dim, "vec_dim");
        put_u32(out, c.k, "k");
        if (method == Method::Vq) {
            put_f32_matrix(out, c.codebook);
        } else {
            if (!c.codebook_q)
                throw io::IoError("encode: vq_uq code without a quantized codebook");
            put_uq(out, *c.codebook_q);
        }
        out.bytes(pack_bits(c.assignments, baselines::VqCode::index_bits(c.k)));
        return;
    }
    case Method::E8: {
        const auto& c = std::get<baselines::E8Code>(code);
        out.u8(static_cast<std::uint8_t>(c.scale_bits));
        put_u32(out, c.rounds.size(), "rounds");
        for (const auto& r : c.rounds) {
            out.bytes(r.indices);
            if (c.scale_bits > 0) {
                if (!r.scales_q)
                    throw io::IoError("encode: e8 round without quantized scales");
                put_uq(out, *r.scales_q);
            } else {
                for (double a : r.scales)
                    out.f32(static_cast<float>(a));
            }
        }
        return;
    }
    }
    throw io::IoError("encode: unknown method");
}

AnyCode get_block(ByteReader& in, Method method, std::size_t rows, std::size_t cols) {
    switch (method) {
    case Method::Bqq: {
        BqqCode c;
        c.rows = rows;
        c.cols = cols;
        c.l = in.u32();
        const std::size_t p = in.u32();
        if (c.l == 0 || p == 0)
            in.fail("bqq code with l = 0 or p = 0");
        if (in.remaining() < p * 12)
            in.fail("truncated bqq scalars");
        c.stacks.resize(p);
        for (auto& s : c.stacks) {
            s.scales.r = get_scalar(in);
            s.scales.s = get_scalar(in);
            s.scales.t = get_scalar(in);
        }
        c.u_total = get_scalar(in);
        for (auto& s : c.stacks) {
            s.y = get_bits(in, rows, c.l);
            s.z = get_bits(in, c.l, cols);
        }
        return c;
    }
    case Method::Uq:
        return get_uq(in, rows, cols);
    case Method::Bcq: {
        baselines::BcqCode c;
        c.rows = rows;
        c.cols = cols;
        const std::size_t p = in.u32();
        if (in.remaining() < p * 4)
            in.fail("truncated bcq scales");
        for (std::size_t k = 0; k < p; ++k)
            c.scales.push_back(get_scalar(in));
        for (std::size_t k = 0; k < p; ++k)
            c.bases.push_back(get_bits(in, rows, cols));
        return c;
    }
    case Method::Svd:
    case Method::SvdUq: {
        baselines::SvdCode c;
        c.rows = rows;
        c.cols = cols;
        c.rank = in.u32();
        if (c.rank == 0 || c.rank > std::min(rows, cols))
            in.fail("svd rank out of range");
        if (method == Method::Svd) {
            if (in.remaining() / 4 < c.rank * (rows + cols))
                in.fail("truncated svd factors");
            c.left = get_f32_matrix(in, rows, c.rank);
            c.right = get_f32_matrix(in, c.rank, cols);
        } else {
            c.left_q = get_uq(in, rows, c.rank);
            c.right_q = get_uq(in, c.rank, cols);
            c.left = c.left_q->dequantize().eigen();
            c.right = c.right_q->dequantize().eigen();
        }
        return c;
    }
    case Method::Vq:
    case Method::VqUq: {
        baselines::VqCode c;
        c.rows = rows;
        c.cols = cols;
        c.vec_dim = in.u32();
        c.k = in.u32();
        if (c.vec_dim == 0 || c.k == 0)
            in.fail("vq code with vec_dim = 0 or k = 0");
        const std::size_t count = (rows * cols + c.vec_dim - 1) / c.vec_dim;
        if (method == Method::Vq) {
            if (in.remaining() / 4 / c.vec_dim < c.k)
                in.fail("truncated vq codebook");
            c.codebook = get_f32_matrix(in, c.k, c.vec_dim);
        } else {
            c.codebook_q = get_uq(in, c.k, c.vec_dim);
            c.codebook = c.codebook_q->dequantize().eigen();
        }
        const auto width = baselines::VqCode::index_bits(c.k);
        c.assignments = unpack_bits(in.bytes(packed_size(count, width)), count, width);
        for (auto a : c.assignments)
            if (a >= c.k)
                in.fail("vq assignment out of range");
        return c;
    }
    case Method::E8: {
        baselines::E8Code c;
        c.rows = rows;
        c.cols = cols;
        c.scale_bits = in.u8();
        const std::size_t nvec = (rows * cols + 7) / 8;
        c.pad_len = nvec * 8 - rows * cols;
        const std::size_t rounds = in.u32();
        if (rounds == 0)
            in.fail("e8 code without rounds");
        for (std::size_t r = 0; r < rounds; ++r) {
            baselines::E8Round rd;
            const auto idx = in.bytes(nvec);
            rd.indices.assign(idx.begin(), idx.end());
            for (auto v : rd.indices)
                if (v >= baselines::kE8CodebookSize)
                    in.fail("e8 index out of range");
            if (c.scale_bits > 0) {
                rd.scales_q = get_uq(in, nvec, 1);
                const DenseMatrix q = rd.scales_q->dequantize();
                rd.scales.assign(q.values().begin(), q.values().end());
            } else {
                if (in.remaining() / 4 < nvec)
                    in.fail("truncated e8 scales");
                for (std::size_t v = 0; v < nvec; ++v)
                    rd.scales.push_back(get_scalar(in));
            }
            c.rounds.push_back(std::move(rd));
        }
        return c;
    }
    }
    in.fail("unknown method");
}

} // namespace

std::vector<std::uint8_t> pack_bits(std::span<const std::uint32_t> values, std::uint32_t width) {
    std::vector<std::uint8_t> out(packed_size(values.size(), width), 0);
    std::size_t bit = 0;
    for (auto v : values)
        for (std::uint32_t b = 0; b < width; ++b, ++bit)
            if ((v >> b) & 1u)
                out[bit >> 3] |= static_cast<std::uint8_t>(1u << (bit & 7));
    return out;
}

std::vector<std::uint32_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t count, std::uint32_t width) {
    if (bytes.size() < packed_size(count, width))
        throw io::ParseError("unpack_bits: not enough bytes");
    std::vector<std::uint32_t> out(count, 0);
    std::size_t bit = 0;
    for (auto& v : out)
        for (std::uint32_t b = 0; b < width; ++b, ++bit)
            if ((bytes[bit >> 3] >> (bit & 7)) & 1u)
                v |= 1u << b;
    return out;
}

std::vector<std::uint8_t> encode(const QuantizedMatrix& q) {
    const auto tiles = q.code.tiles();
    if (tiles.size() != q.code.blocks.size())
        throw io::IoError("encode: block count does not match the tiling");
    ByteWriter out;
    out.raw("BQQC");
    out.u16(kVersion);
    out.u8(static_cast<std::uint8_t>(q.method));
    out.u8(q.standardization ? 1 : 0);
    put_u32(out, q.code.rows, "rows");
    put_u32(out, q.code.cols, "cols");
    put_u32(out, q.code.group_rows, "group_rows");
    put_u32(out, q.code.group_cols, "group_cols");
    if (q.standardization) {
        out.f64(q.standardization->mean);
        out.f64(q.standardization->std);
        out.u8(q.standardization->constant ? 1 : 0);
    }
    for (const auto& block : q.code.blocks)
        put_block(out, q.method, block);
    return out.take();
}

QuantizedMatrix decode(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes, "code file");
    const auto magic = in.bytes(4);
    if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != "BQQC")
        throw io::ParseError("code file: bad magic at byte 0");
    const auto version = in.u16();
    if (version != kVersion)
        in.fail("unsupported version " + std::to_string(version));
    const auto method_byte = in.u8();
    if (method_byte > static_cast<std::uint8_t>(Method::E8))
        in.fail("unknown method id " + std::to_string(method_byte));
    const auto flags = in.u8();
    if (flags & ~1u)
        in.fail("unknown flags");

    QuantizedMatrix q;
    q.method = static_cast<Method>(method_byte);
    q.code.rows = in.u32();
    q.code.cols = in.u32();
    q.code.group_rows = in.u32();
    q.code.group_cols = in.u32();
    if (q.code.rows == 0 || q.code.cols == 0 || q.code.group_rows == 0 || q.code.group_cols == 0)
        in.fail("zero dimension in header");
    if (flags & 1u) {
        StandardizationRecord rec;
        rec.mean = in.f64();
        rec.std = in.f64();
        rec.constant = in.u8() != 0;
        if (!std::isfinite(rec.mean) || !(rec.std > 0.0) || !std::isfinite(rec.std))
            in.fail("invalid standardization record");
        q.standardization = rec;
    }
    const std::uint64_t num_blocks = ((q.code.rows + q.code.group_rows - 1) / q.code.group_rows) *
                                     ((q.code.cols + q.code.group_cols - 1) / q.code.group_cols);
    if (num_blocks > in.remaining())
        in.fail("header declares " + std::to_string(num_blocks) + " blocks but the payload is shorter");
    for (const auto& t : q.code.tiles())
        q.code.blocks.push_back(get_block(in, q.method, t.rows, t.cols));
    if (in.remaining() != 0)
        in.fail("trailing " + std::to_string(in.remaining()) + " bytes");
    return q;
}

void save_code(const std::filesystem::path& path, const QuantizedMatrix& q) { io::write_file(path, encode(q)); }

QuantizedMatrix load_code(const std::filesystem::path& path) { return decode(io::read_file(path)); }

} // namespace bqq::bench
