#include "bqq/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bqq/random.hpp"

namespace bqq::io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError("read failed: " + path.string());
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

// ---------------------------------------------------------------------------

void ByteWriter::u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i)
        buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteReader::fail(const std::string& what) const {
    throw ParseError(context_ + ": " + what + " at byte " + std::to_string(pos_));
}

void ByteReader::need(std::size_t n) const {
    if (remaining() < n)
        fail("truncated input (need " + std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left)");
}

std::uint8_t ByteReader::u8() {
    need(1);
    return bytes_[pos_++];
}
std::uint16_t ByteReader::u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i)
        v |= static_cast<std::uint16_t>(bytes_[pos_++]) << (8 * i);
    return v;
}
std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
}
std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
}
float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }
std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
}

// ---------------------------------------------------------------------------

FvecsRecordSet parse_fvecs(std::span<const std::uint8_t> bytes) {
    FvecsRecordSet set;
    ByteReader in(bytes, "fvecs");
    while (in.remaining() > 0) {
        const std::size_t record_start = in.offset();
        if (in.remaining() < 4)
            in.fail("trailing " + std::to_string(in.remaining()) + " bytes after last record");
        const auto dim = static_cast<std::int32_t>(in.u32());
        if (dim <= 0)
            throw ParseError("fvecs: non-positive dimension " + std::to_string(dim) + " at byte " +
                             std::to_string(record_start));
        if (set.dim && *set.dim != static_cast<std::uint32_t>(dim))
            throw ParseError("fvecs: dimension " + std::to_string(dim) + " differs from " + std::to_string(*set.dim) +
                             " at byte " + std::to_string(record_start));
        set.dim = static_cast<std::uint32_t>(dim);
        std::vector<float> v(static_cast<std::size_t>(dim));
        for (auto& x : v) {
            x = in.f32();
            if (!std::isfinite(x))
                throw ParseError("fvecs: non-finite value at byte " + std::to_string(in.offset() - 4));
        }
        set.vectors.push_back(std::move(v));
    }
    return set;
}

std::vector<std::uint8_t> write_fvecs(const FvecsRecordSet& set) {
    ByteWriter out;
    for (const auto& v : set.vectors) {
        if (!set.dim || v.size() != *set.dim)
            throw IoError("write_fvecs: vector length does not match dim");
        out.u32(static_cast<std::uint32_t>(v.size()));
        for (float x : v)
            out.f32(x);
    }
    return out.take();
}

DenseMatrix fvecs_to_matrix(const FvecsRecordSet& set, std::size_t max_rows) {
    if (!set.dim || set.vectors.empty())
        throw IoError("fvecs_to_matrix: empty record set");
    const std::size_t rows = max_rows ? std::min(max_rows, set.vectors.size()) : set.vectors.size();
    DenseMatrix out(rows, *set.dim);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < *set.dim; ++j)
            out(i, j) = set.vectors[i][j];
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_tokens(std::string_view line, std::string_view seps) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && seps.find(line[i]) != std::string_view::npos)
            ++i;
        std::size_t j = i;
        while (j < line.size() && seps.find(line[j]) == std::string_view::npos)
            ++j;
        if (j > i)
            out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

bool parse_double(std::string_view tok, double& out) {
    const char* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++lineno;
        if (!fn(line, lineno))
            return;
        if (nl == std::string_view::npos)
            break;
        pos = nl + 1;
    }
}

} // namespace

TspInstance parse_tsplib(std::string_view text) {
    TspInstance inst;
    std::optional<std::size_t> dimension;
    std::string edge_type;
    bool in_coords = false;
    bool saw_section = false;

    for_each_line(text, [&](std::string_view raw, std::size_t lineno) {
        const auto line = trim(raw);
        if (line.empty())
            return true;
        const auto where = " at line " + std::to_string(lineno);
        if (line == "EOF")
            return false;
        if (in_coords) {
            const auto toks = split_tokens(line, " \t");
            if (toks.size() != 3) {
                // A keyword line ends the section.
                if (!toks.empty() && std::isalpha(static_cast<unsigned char>(toks[0][0]))) {
                    in_coords = false;
                    return true;
                }
                throw ParseError("tsplib: malformed coordinate line" + where);
            }
            double id = 0, x = 0, y = 0;
            if (!parse_double(toks[0], id) || !parse_double(toks[1], x) || !parse_double(toks[2], y))
                throw ParseError("tsplib: malformed coordinate line" + where);
            inst.node_coords.emplace_back(x, y);
            return true;
        }
        if (line.starts_with("NODE_COORD_SECTION")) {
            if (edge_type.empty())
                throw ParseError("tsplib: NODE_COORD_SECTION before EDGE_WEIGHT_TYPE" + where);
            in_coords = true;
            saw_section = true;
            return true;
        }
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) {
            if (line.ends_with("_SECTION"))
                throw ParseError("tsplib: unsupported section " + std::string(line) + where);
            throw ParseError("tsplib: expected KEY : VALUE" + where);
        }
        const auto key = trim(line.substr(0, colon));
        const auto value = trim(line.substr(colon + 1));
        if (key == "NAME") {
            inst.name = value;
        } else if (key == "DIMENSION") {
            double d = 0;
            if (!parse_double(value, d) || d < 0 || d != std::floor(d))
                throw ParseError("tsplib: bad DIMENSION" + where);
            dimension = static_cast<std::size_t>(d);
        } else if (key == "EDGE_WEIGHT_TYPE") {
            edge_type = value;
            if (edge_type != "EUC_2D")
                throw ParseError("tsplib: unsupported EDGE_WEIGHT_TYPE " + edge_type + where);
        }
        return true;
    });

    if (!saw_section)
        throw ParseError("tsplib: missing NODE_COORD_SECTION");
    if (dimension && *dimension != inst.node_coords.size())
        throw ParseError("tsplib: DIMENSION " + std::to_string(*dimension) + " but " +
                         std::to_string(inst.node_coords.size()) + " coordinates");
    if (inst.node_coords.size() < 2)
        throw ParseError("tsplib: need at least 2 nodes");
    return inst;
}

std::string write_tsplib(const TspInstance& inst) {
    std::ostringstream out;
    out.precision(17);
    out << "NAME : " << (inst.name.empty() ? "unnamed" : inst.name) << "\n";
    out << "TYPE : TSP\n";
    out << "DIMENSION : " << inst.node_coords.size() << "\n";
    out << "EDGE_WEIGHT_TYPE : EUC_2D\n";
    out << "NODE_COORD_SECTION\n";
    for (std::size_t i = 0; i < inst.node_coords.size(); ++i)
        out << i + 1 << " " << inst.node_coords[i].first << " " << inst.node_coords[i].second << "\n";
    out << "EOF\n";
    return out.str();
}

DenseMatrix distance_matrix(const TspInstance& inst) {
    const std::size_t n = inst.node_coords.size();
    DenseMatrix out(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = inst.node_coords[i].first - inst.node_coords[j].first;
            const double dy = inst.node_coords[i].second - inst.node_coords[j].second;
            const double d = std::floor(std::sqrt(dx * dx + dy * dy) + 0.5);
            out(i, j) = d;
            out(j, i) = d;
        }
    return out;
}

// ---------------------------------------------------------------------------

DenseMatrix parse_delimited(std::string_view text) {
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    for_each_line(text, [&](std::string_view raw, std::size_t lineno) {
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#')
            return true;
        const auto toks = split_tokens(line, ", \t;");
        if (rows == 0)
            cols = toks.size();
        else if (toks.size() != cols)
            throw ParseError("delimited: line " + std::to_string(lineno) + " has " + std::to_string(toks.size()) +
                             " fields, expected " + std::to_string(cols));
        for (std::size_t k = 0; k < toks.size(); ++k) {
            double v = 0;
            if (!parse_double(toks[k], v))
                throw ParseError("delimited: bad number '" + std::string(toks[k]) + "' at line " +
                                 std::to_string(lineno) + ", field " + std::to_string(k + 1));
            values.push_back(v);
        }
        ++rows;
        return true;
    });
    if (rows == 0 || cols == 0)
        throw ParseError("delimited: no data");
    return DenseMatrix(rows, cols, std::move(values));
}

std::string write_delimited(const DenseMatrix& m, char sep) {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j)
                out.push_back(sep);
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, m(i, j));
            out.append(buf, ptr);
        }
        out.push_back('\n');
    }
    return out;
}

// ---------------------------------------------------------------------------

DenseMatrix parse_raw_matrix(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes, "raw matrix");
    const auto magic = in.bytes(4);
    if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != "BQQM")
        throw ParseError("raw matrix: bad magic at byte 0");
    const auto version = in.u16();
    if (version != 1)
        in.fail("unsupported version " + std::to_string(version));
    const auto width = in.u16();
    if (width != 8)
        in.fail("unsupported element width " + std::to_string(width));
    const auto rows = in.u64();
    const auto cols = in.u64();
    if (rows == 0 || cols == 0)
        in.fail("zero dimension");
    if (rows > (std::uint64_t{1} << 32) || cols > (std::uint64_t{1} << 32) || in.remaining() / 8 / cols < rows)
        in.fail("payload shorter than " + std::to_string(rows) + "x" + std::to_string(cols));
    std::vector<double> values(rows * cols);
    for (auto& v : values) {
        v = in.f64();
        if (!std::isfinite(v))
            throw ParseError("raw matrix: non-finite value at byte " + std::to_string(in.offset() - 8));
    }
    if (in.remaining() != 0)
        in.fail("trailing " + std::to_string(in.remaining()) + " bytes");
    return DenseMatrix(rows, cols, std::move(values));
}

std::vector<std::uint8_t> write_raw_matrix(const DenseMatrix& m) {
    ByteWriter out;
    out.raw("BQQM");
    out.u16(1);
    out.u16(8);
    out.u64(m.rows());
    out.u64(m.cols());
    for (double v : m.values())
        out.f64(v);
    return out.take();
}

// ---------------------------------------------------------------------------

DenseMatrix gen_gaussian(std::size_t m, std::size_t n, std::uint64_t seed) {
    if (m == 0 || n == 0)
        throw MatrixError("gen_gaussian: dimensions must be positive");
    CounterRng rng(seed, 0x9a55);
    DenseMatrix out(m, n);
    for (auto& v : out.values())
        v = rng.normal();
    return out;
}

DenseMatrix gen_lowrank_noise(std::size_t m, std::size_t n, std::size_t rank, double noise_std, std::uint64_t seed) {
    if (m == 0 || n == 0)
        throw MatrixError("gen_lowrank_noise: dimensions must be positive");
    if (rank > std::min(m, n))
        throw MatrixError("gen_lowrank_noise: rank exceeds min(m, n)");
    if (!(noise_std >= 0.0))
        throw MatrixError("gen_lowrank_noise: noise_std must be non-negative");
    CounterRng factors(seed, 0x10f4);
    RowMajorMatrix a(m, rank), b(rank, n);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        a.data()[i] = factors.normal();
    for (Eigen::Index i = 0; i < b.size(); ++i)
        b.data()[i] = factors.normal();
    RowMajorMatrix w = rank ? RowMajorMatrix(a * b) : RowMajorMatrix::Zero(m, n);
    if (noise_std > 0.0) {
        CounterRng noise(seed, 0x2015e);
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w.data()[i] += noise_std * noise.normal();
    }
    return DenseMatrix(std::move(w));
}

TspInstance gen_random_cities(std::size_t n, std::uint64_t seed) {
    if (n < 2)
        throw MatrixError("gen_random_cities: need at least 2 cities");
    CounterRng rng(seed, 0xc17);
    TspInstance inst;
    inst.name = "random" + std::to_string(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = 1000.0 * rng.uniform();
        const double y = 1000.0 * rng.uniform();
        inst.node_coords.emplace_back(x, y);
    }
    return inst;
}

// ---------------------------------------------------------------------------

std::optional<MatrixFormat> parse_format(std::string_view name) {
    if (name == "raw")
        return MatrixFormat::Raw;
    if (name == "csv" || name == "txt" || name == "delimited")
        return MatrixFormat::Delimited;
    if (name == "fvecs")
        return MatrixFormat::Fvecs;
    if (name == "tsplib" || name == "tsp")
        return MatrixFormat::Tsplib;
    return std::nullopt;
}

MatrixFormat guess_format(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv" || ext == ".txt")
        return MatrixFormat::Delimited;
    if (ext == ".fvecs")
        return MatrixFormat::Fvecs;
    if (ext == ".tsp")
        return MatrixFormat::Tsplib;
    return MatrixFormat::Raw;
}

DenseMatrix load_matrix(const std::filesystem::path& path, std::optional<MatrixFormat> format) {
    switch (format.value_or(guess_format(path))) {
    case MatrixFormat::Raw:
        return parse_raw_matrix(read_file(path));
    case MatrixFormat::Delimited:
        return parse_delimited(read_text_file(path));
    case MatrixFormat::Fvecs:
        return fvecs_to_matrix(parse_fvecs(read_file(path)));
    case MatrixFormat::Tsplib:
        return distance_matrix(parse_tsplib(read_text_file(path)));
    }
    throw IoError("load_matrix: unknown format");
}

void save_matrix(const std::filesystem::path& path, const DenseMatrix& m, std::optional<MatrixFormat> format) {
    switch (format.value_or(guess_format(path))) {
    case MatrixFormat::Raw:
        write_file(path, write_raw_matrix(m));
        return;
    case MatrixFormat::Delimited:
        write_text_file(path, write_delimited(m));
        return;
    case MatrixFormat::Fvecs: {
        FvecsRecordSet set;
        set.dim = static_cast<std::uint32_t>(m.cols());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            std::vector<float> v(m.cols());
            for (std::size_t j = 0; j < m.cols(); ++j)
                v[j] = static_cast<float>(m(i, j));
            set.vectors.push_back(std::move(v));
        }
        write_file(path, write_fvecs(set));
        return;
    }
    case MatrixFormat::Tsplib:
        throw IoError("save_matrix: TSPLIB output holds coordinates, not matrices");
    }
}

} // namespace bqq::io
