#include "bqq/baselines.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "bqq/random.hpp"
#include "bqq/svd.hpp"

namespace bqq::baselines {

namespace {

double linspace_at(double lo, double hi, std::size_t i, std::size_t count) {
    if (count == 1)
        return lo;
    if (i + 1 == count)
        return hi;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

std::uint32_t quantize_index(double v, double r_min, double r_max, double levels_minus_one) {
    const double c = std::clamp(v, r_min, r_max);
    return static_cast<std::uint32_t>(std::round((c - r_min) / (r_max - r_min) * levels_minus_one));
}

} // namespace

DenseMatrix UqCode::dequantize() const {
    std::vector<double> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i)
        out[i] = scale * static_cast<double>(indices[i]) + bias;
    return DenseMatrix(rows, cols, std::move(out));
}

MemoryFootprint UqCode::footprint(std::uint32_t scalar_bits) const {
    return MemoryFootprint::make(std::uint64_t{bits} * indices.size(), 2, scalar_bits);
}

UqCode uq_grid(std::span<const double> values, std::size_t rows, std::size_t cols, std::uint32_t bits,
               std::size_t n_split) {
    if (bits == 0 || bits > 24)
        throw MatrixError("uq_grid: bits must be in [1, 24]");
    if (n_split < 2)
        throw MatrixError("uq_grid: n_split must be at least 2");
    if (values.empty() || values.size() != rows * cols)
        throw MatrixError("uq_grid: shape mismatch");

    UqCode code;
    code.bits = bits;
    code.rows = rows;
    code.cols = cols;
    code.indices.assign(values.size(), 0);

    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double w_min = *lo_it;
    const double w_max = *hi_it;
    if (!(w_max > w_min)) {
        code.scale = 0.0;
        code.bias = w_min;
        return code;
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    const double lm1 = static_cast<double>((std::uint64_t{1} << bits) - 1);

    double best = std::numeric_limits<double>::infinity();
    double best_min = w_min, best_max = w_max;
    for (std::size_t a = 0; a < n_split; ++a) {
        const double r_max = linspace_at(mean, w_max, a, n_split);
        for (std::size_t b = 0; b < n_split; ++b) {
            const double r_min = linspace_at(w_min, mean, b, n_split);
            if (!(r_max > r_min))
                continue;
            const double step = (r_max - r_min) / lm1;
            double err = 0.0;
            for (double v : values) {
                const double q = static_cast<double>(quantize_index(v, r_min, r_max, lm1));
                const double d = v - (q * step + r_min);
                err += d * d;
            }
            if (err < best) {
                best = err;
                best_min = r_min;
                best_max = r_max;
            }
        }
    }
    code.scale = (best_max - best_min) / lm1;
    code.bias = best_min;
    for (std::size_t i = 0; i < values.size(); ++i)
        code.indices[i] = quantize_index(values[i], best_min, best_max, lm1);
    return code;
}

UqCode uq_grid(const DenseMatrix& w, std::uint32_t bits, std::size_t n_split) {
    return uq_grid(w.values(), w.rows(), w.cols(), bits, n_split);
}

UqCode uq_minmax(const DenseMatrix& w, std::uint32_t bits) {
    if (bits == 0 || bits > 24)
        throw MatrixError("uq_minmax: bits must be in [1, 24]");
    UqCode code;
    code.bits = bits;
    code.rows = w.rows();
    code.cols = w.cols();
    code.indices.assign(w.size(), 0);
    const double lo = w.min();
    const double hi = w.max();
    code.bias = lo;
    if (!(hi > lo))
        return code;
    const double lm1 = static_cast<double>((std::uint64_t{1} << bits) - 1);
    code.scale = (hi - lo) / lm1;
    const auto vals = w.values();
    for (std::size_t i = 0; i < vals.size(); ++i)
        code.indices[i] = quantize_index(vals[i], lo, hi, lm1);
    return code;
}

// ---------------------------------------------------------------------------

DenseMatrix BcqCode::dequantize() const {
    RowMajorMatrix out = RowMajorMatrix::Zero(rows, cols);
    for (std::size_t k = 0; k < bases.size(); ++k)
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                out(i, j) += bases[k].get(i, j) ? scales[k] : -scales[k];
    return DenseMatrix(std::move(out));
}

MemoryFootprint BcqCode::footprint(std::uint32_t scalar_bits) const {
    return MemoryFootprint::make(static_cast<std::uint64_t>(bases.size()) * rows * cols, scales.size(), scalar_bits);
}

namespace {

// Least-squares scales for fixed sign planes (signs[k][e] in {-1,+1}).
std::vector<double> refit_scales(const std::vector<std::vector<double>>& signs, std::span<const double> target) {
    const auto p = static_cast<Eigen::Index>(signs.size());
    Eigen::MatrixXd g(p, p);
    Eigen::VectorXd rhs(p);
    for (Eigen::Index a = 0; a < p; ++a) {
        rhs(a) = std::inner_product(target.begin(), target.end(), signs[a].begin(), 0.0);
        for (Eigen::Index b = a; b < p; ++b) {
            g(a, b) = std::inner_product(signs[a].begin(), signs[a].end(), signs[b].begin(), 0.0);
            g(b, a) = g(a, b);
        }
    }
    const Eigen::VectorXd sol = g.completeOrthogonalDecomposition().solve(rhs);
    return {sol.data(), sol.data() + p};
}

double residual_sq(const std::vector<std::vector<double>>& signs, const std::vector<double>& scales,
                   std::span<const double> target) {
    double acc = 0.0;
    for (std::size_t e = 0; e < target.size(); ++e) {
        double v = target[e];
        for (std::size_t k = 0; k < signs.size(); ++k)
            v -= scales[k] * signs[k][e];
        acc += v * v;
    }
    return acc;
}

// For fixed scales choose, per element, the sign combination closest to the target.
void reselect_signs(std::vector<std::vector<double>>& signs, const std::vector<double>& scales,
                    std::span<const double> target) {
    const std::size_t p = signs.size();
    const std::size_t combos = std::size_t{1} << p;
    std::vector<std::pair<double, std::size_t>> table(combos);
    for (std::size_t c = 0; c < combos; ++c) {
        double v = 0.0;
        for (std::size_t k = 0; k < p; ++k)
            v += ((c >> k) & 1u) ? scales[k] : -scales[k];
        table[c] = {v, c};
    }
    std::sort(table.begin(), table.end());
    for (std::size_t e = 0; e < target.size(); ++e) {
        double current = 0.0;
        for (std::size_t k = 0; k < p; ++k)
            current += scales[k] * signs[k][e];
        const double x = target[e];
        auto it = std::lower_bound(table.begin(), table.end(), std::pair{x, std::size_t{0}});
        double best_err = (x - current) * (x - current);
        std::size_t best_combo = combos;
        for (auto cand : {it, it == table.begin() ? it : std::prev(it)}) {
            if (cand == table.end())
                continue;
            const double err = (x - cand->first) * (x - cand->first);
            if (err < best_err) {
                best_err = err;
                best_combo = cand->second;
            }
        }
        if (best_combo != combos)
            for (std::size_t k = 0; k < p; ++k)
                signs[k][e] = ((best_combo >> k) & 1u) ? 1.0 : -1.0;
    }
}

} // namespace

BcqCode bcq(const DenseMatrix& w, std::size_t p, std::vector<double>* residual_sq_norms) {
    if (p == 0)
        throw MatrixError("bcq: p must be at least 1");
    if (p > 16)
        throw MatrixError("bcq: at most 16 bases supported");
    const auto target = w.values();
    const std::size_t count = target.size();

    std::vector<std::vector<double>> signs;
    std::vector<double> scales;
    std::vector<double> res(target.begin(), target.end());
    if (residual_sq_norms)
        residual_sq_norms->clear();

    for (std::size_t round = 0; round < p; ++round) {
        std::vector<double> plane(count);
        double abs_sum = 0.0;
        for (std::size_t e = 0; e < count; ++e) {
            plane[e] = res[e] >= 0.0 ? 1.0 : -1.0;
            abs_sum += std::abs(res[e]);
        }
        signs.push_back(std::move(plane));
        scales.push_back(abs_sum / static_cast<double>(count));

        // One alternating pass: refit, re-select signs, refit. Each stage is
        // accepted only if it does not increase the error.
        double err = residual_sq(signs, scales, target);
        auto refit = refit_scales(signs, target);
        if (double e2 = residual_sq(signs, refit, target); e2 <= err) {
            scales = std::move(refit);
            err = e2;
        }
        reselect_signs(signs, scales, target);
        refit = refit_scales(signs, target);
        if (residual_sq(signs, refit, target) <= residual_sq(signs, scales, target))
            scales = std::move(refit);

        for (std::size_t e = 0; e < count; ++e) {
            double v = target[e];
            for (std::size_t k = 0; k < signs.size(); ++k)
                v -= scales[k] * signs[k][e];
            res[e] = v;
        }
        if (residual_sq_norms)
            residual_sq_norms->push_back(std::inner_product(res.begin(), res.end(), res.begin(), 0.0));
    }

    BcqCode code;
    code.rows = w.rows();
    code.cols = w.cols();
    for (std::size_t k = 0; k < p; ++k) {
        // Keep scales non-negative by absorbing the sign into the plane.
        const bool flip = scales[k] < 0.0;
        BitMatrix plane(w.rows(), w.cols());
        for (std::size_t e = 0; e < count; ++e)
            plane.set(e / w.cols(), e % w.cols(), (signs[k][e] > 0.0) != flip);
        code.bases.push_back(std::move(plane));
        code.scales.push_back(std::abs(scales[k]));
    }
    return code;
}

// ---------------------------------------------------------------------------

DenseMatrix SvdCode::dequantize() const {
    if (left_q && right_q)
        return DenseMatrix(RowMajorMatrix(left_q->dequantize().eigen() * right_q->dequantize().eigen()));
    return DenseMatrix(RowMajorMatrix(left * right));
}

MemoryFootprint SvdCode::footprint(std::uint32_t scalar_bits) const {
    if (left_q && right_q) {
        MemoryFootprint f = left_q->footprint(scalar_bits);
        f += right_q->footprint(scalar_bits);
        return f;
    }
    return MemoryFootprint::make(0, rank * (rows + cols), scalar_bits);
}

SvdCode svd_lowrank(const DenseMatrix& w, std::size_t rank) {
    const std::size_t k = std::min(w.rows(), w.cols());
    if (rank == 0 || rank > k)
        throw MatrixError("svd_lowrank: rank must be in [1, " + std::to_string(k) + "], got " + std::to_string(rank));
    const Svd svd = jacobi_svd(w.eigen());
    const auto r = static_cast<Eigen::Index>(rank);
    const Eigen::VectorXd root = svd.sigma.head(r).cwiseSqrt();
    SvdCode code;
    code.rank = rank;
    code.rows = w.rows();
    code.cols = w.cols();
    code.left = svd.u.leftCols(r) * root.asDiagonal();
    code.right = root.asDiagonal() * svd.v.leftCols(r).transpose();
    return code;
}

SvdCode svd_uq(const DenseMatrix& w, std::size_t rank, std::uint32_t bits, std::size_t n_split) {
    SvdCode code = svd_lowrank(w, rank);
    code.left_q = uq_grid(DenseMatrix(code.left), bits, n_split);
    code.right_q = uq_grid(DenseMatrix(code.right), bits, n_split);
    return code;
}

// ---------------------------------------------------------------------------

std::uint32_t VqCode::index_bits(std::size_t k) {
    return k <= 1 ? 0u : static_cast<std::uint32_t>(std::bit_width(k - 1));
}

namespace {

RowMajorMatrix flatten_padded(const DenseMatrix& w, std::size_t vec_dim) {
    const std::size_t count = (w.size() + vec_dim - 1) / vec_dim;
    RowMajorMatrix out = RowMajorMatrix::Zero(count, vec_dim);
    std::copy(w.values().begin(), w.values().end(), out.data());
    return out;
}

DenseMatrix unflatten(const RowMajorMatrix& vecs, std::size_t rows, std::size_t cols) {
    std::vector<double> vals(vecs.data(), vecs.data() + rows * cols);
    return DenseMatrix(rows, cols, std::move(vals));
}

std::uint32_t nearest(const RowMajorMatrix& centroids, const RowMajorMatrix& data, Eigen::Index row, double* dist) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = (data.row(row) - centroids.row(c)).squaredNorm();
        if (d < best) {
            best = d;
            arg = static_cast<std::uint32_t>(c);
        }
    }
    if (dist)
        *dist = best;
    return arg;
}

} // namespace

DenseMatrix VqCode::dequantize() const {
    const RowMajorMatrix book = codebook_q ? codebook_q->dequantize().eigen() : codebook;
    RowMajorMatrix vecs(assignments.size(), vec_dim);
    for (std::size_t i = 0; i < assignments.size(); ++i)
        vecs.row(i) = book.row(assignments[i]);
    return unflatten(vecs, rows, cols);
}

MemoryFootprint VqCode::footprint(std::uint32_t scalar_bits) const {
    const std::uint64_t idx = std::uint64_t{index_bits(k)} * assignments.size();
    if (codebook_q) {
        MemoryFootprint f = codebook_q->footprint(scalar_bits);
        return MemoryFootprint::make(f.binary_bits + idx, f.scalar_count, scalar_bits);
    }
    return MemoryFootprint::make(idx, k * vec_dim, scalar_bits);
}

VqCode vq_kmeans(const DenseMatrix& w, std::size_t vec_dim, std::size_t k, std::uint64_t seed,
                 std::optional<std::uint32_t> centroid_bits, const KMeansOptions& opts) {
    if (vec_dim == 0 || k == 0)
        throw MatrixError("vq_kmeans: vec_dim and k must be positive");
    const RowMajorMatrix data = flatten_padded(w, vec_dim);
    const auto count = data.rows();
    if (static_cast<Eigen::Index>(k) > count)
        throw MatrixError("vq_kmeans: k = " + std::to_string(k) + " exceeds the number of vectors (" +
                          std::to_string(count) + ")");

    // k-means++ seeding.
    CounterRng rng(seed, 0x6b6d);
    RowMajorMatrix centroids(k, vec_dim);
    std::vector<double> d2(static_cast<std::size_t>(count), std::numeric_limits<double>::infinity());
    Eigen::Index pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(count)));
    for (std::size_t c = 0; c < k; ++c) {
        centroids.row(c) = data.row(pick);
        double total = 0.0;
        for (Eigen::Index i = 0; i < count; ++i) {
            d2[i] = std::min(d2[i], (data.row(i) - centroids.row(c)).squaredNorm());
            total += d2[i];
        }
        if (c + 1 == k)
            break;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            pick = count - 1;
            for (Eigen::Index i = 0; i < count; ++i) {
                target -= d2[i];
                if (target < 0.0 && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            while (d2[pick] == 0.0 && pick > 0)
                --pick;
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(count)));
        }
    }

    VqCode code;
    code.rows = w.rows();
    code.cols = w.cols();
    code.vec_dim = vec_dim;
    code.k = k;
    code.assignments.assign(static_cast<std::size_t>(count), 0);

    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
        double sse = 0.0;
        bool changed = iter == 0;
        for (Eigen::Index i = 0; i < count; ++i) {
            double d = 0.0;
            const auto a = nearest(centroids, data, i, &d);
            changed = changed || a != code.assignments[i];
            code.assignments[i] = a;
            sse += d;
        }
        code.objective_trace.push_back(sse);
        const bool converged = !changed || (std::isfinite(prev) && prev - sse <= opts.tol * std::max(prev, 1e-300));
        prev = sse;

        RowMajorMatrix sums = RowMajorMatrix::Zero(k, vec_dim);
        std::vector<std::size_t> sizes(k, 0);
        for (Eigen::Index i = 0; i < count; ++i) {
            sums.row(code.assignments[i]) += data.row(i);
            ++sizes[code.assignments[i]];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (sizes[c] > 0)
                centroids.row(c) = sums.row(c) / static_cast<double>(sizes[c]);
        if (converged)
            break;
    }
    // Final assignment against the updated centroids.
    for (Eigen::Index i = 0; i < count; ++i)
        code.assignments[i] = nearest(centroids, data, i, nullptr);
    code.codebook = centroids;

    if (centroid_bits) {
        code.codebook_q = uq_grid(DenseMatrix(centroids), *centroid_bits);
        const RowMajorMatrix book = code.codebook_q->dequantize().eigen();
        for (Eigen::Index i = 0; i < count; ++i)
            code.assignments[i] = nearest(book, data, i, nullptr);
    }
    return code;
}

// ---------------------------------------------------------------------------

const std::array<E8Vector, kE8CodebookSize>& e8_codebook() {
    static const std::array<E8Vector, kE8CodebookSize> book = [] {
        std::array<E8Vector, kE8CodebookSize> out{};
        std::size_t n = 0;
        for (int i = 0; i < 8; ++i)
            for (int j = i + 1; j < 8; ++j)
                for (int si : {1, -1})
                    for (int sj : {1, -1}) {
                        E8Vector v{};
                        v[i] = si;
                        v[j] = sj;
                        out[n++] = v;
                    }
        for (unsigned mask = 0; mask < 256; ++mask) {
            if (std::popcount(mask) % 2 != 0)
                continue;
            E8Vector v{};
            for (int i = 0; i < 8; ++i)
                v[i] = (mask >> i) & 1u ? -0.5 : 0.5;
            out[n++] = v;
        }
        return out;
    }();
    return book;
}

DenseMatrix E8Code::dequantize() const {
    const auto& book = e8_codebook();
    const std::size_t nvec = (rows * cols + pad_len) / 8;
    std::vector<double> flat(nvec * 8, 0.0);
    for (const auto& round : rounds)
        for (std::size_t v = 0; v < nvec; ++v)
            for (std::size_t j = 0; j < 8; ++j)
                flat[v * 8 + j] += round.scales[v] * book[round.indices[v]][j];
    flat.resize(rows * cols);
    return DenseMatrix(rows, cols, std::move(flat));
}

MemoryFootprint E8Code::footprint(std::uint32_t scalar_bits) const {
    const std::uint64_t nvec = (rows * cols + pad_len) / 8;
    const std::uint64_t r = rounds.size();
    if (scale_bits > 0)
        return MemoryFootprint::make(r * nvec * (8 + scale_bits), 2 * r, scalar_bits);
    return MemoryFootprint::make(r * nvec * 8, r * nvec, scalar_bits);
}

E8Code e8_lvq(const DenseMatrix& w, std::size_t n_rounds, std::uint32_t scale_bits) {
    if (n_rounds == 0)
        throw MatrixError("e8_lvq: at least one round required");
    const auto& book = e8_codebook();
    const std::size_t total = w.size();
    const std::size_t nvec = (total + 7) / 8;

    E8Code code;
    code.rows = w.rows();
    code.cols = w.cols();
    code.scale_bits = scale_bits;
    code.pad_len = nvec * 8 - total;

    std::vector<double> res(nvec * 8, 0.0);
    std::copy(w.values().begin(), w.values().end(), res.begin());
    const double inv_code_norm = 1.0 / std::sqrt(2.0);

    for (std::size_t round = 0; round < n_rounds; ++round) {
        E8Round rd;
        rd.indices.assign(nvec, 0);
        std::vector<double> alpha(nvec, 0.0);
        for (std::size_t v = 0; v < nvec; ++v) {
            const double* d = &res[v * 8];
            double norm2 = 0.0;
            for (std::size_t j = 0; j < 8; ++j)
                norm2 += d[j] * d[j];
            if (!(norm2 > 0.0))
                continue;
            const double inv_norm = 1.0 / std::sqrt(norm2);
            double best = -std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < kE8CodebookSize; ++c) {
                double dot = 0.0;
                for (std::size_t j = 0; j < 8; ++j)
                    dot += d[j] * book[c][j];
                const double cosine = dot * inv_norm * inv_code_norm;
                if (cosine > best) {
                    best = cosine;
                    arg = c;
                }
            }
            rd.indices[v] = static_cast<std::uint8_t>(arg);
            double dot = 0.0;
            for (std::size_t j = 0; j < 8; ++j)
                dot += d[j] * book[arg][j];
            alpha[v] = dot / 2.0;
        }
        if (scale_bits > 0) {
            rd.scales_q = uq_grid(alpha, nvec, 1, scale_bits);
            const DenseMatrix q = rd.scales_q->dequantize();
            rd.scales.assign(q.values().begin(), q.values().end());
        } else {
            rd.scales = alpha;
        }
        for (std::size_t v = 0; v < nvec; ++v)
            for (std::size_t j = 0; j < 8; ++j)
                res[v * 8 + j] -= rd.scales[v] * book[rd.indices[v]][j];
        double err = 0.0;
        for (std::size_t e = 0; e < total; ++e)
            err += res[e] * res[e];
        code.residual_sq_norms.push_back(err);
        code.rounds.push_back(std::move(rd));
    }
    return code;
}

} // namespace bqq::baselines
