#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "bqq/baselines.hpp"
#include "bqq/io.hpp"
#include "bqq/random.hpp"
#include "bqq/svd.hpp"

using namespace bqq;
using namespace bqq::baselines;

namespace {

// Clip-quantize-dequantize over one range, written out directly.
double naive_uq_mse(const DenseMatrix& w, std::uint32_t bits, double lo, double hi) {
    const double levels = std::ldexp(1.0, static_cast<int>(bits)) - 1;
    const double step = (hi - lo) / levels;
    double err = 0.0;
    for (double v : w.values()) {
        const double c = std::clamp(v, lo, hi);
        const double q = std::round((c - lo) / step);
        const double d = v - (q * step + lo);
        err += d * d;
    }
    return err / static_cast<double>(w.size());
}

} // namespace

TEST_CASE("uq on grid-aligned values is exact") {
    const DenseMatrix w{{0, 1, 2, 3}, {3, 2, 1, 0}};
    CHECK(mse(w, uq_grid(w, 2).dequantize()) < 1e-24);
    const DenseMatrix b{{0, 1}};
    const UqCode c = uq_grid(b, 1);
    CHECK(c.indices == std::vector<std::uint32_t>{0, 1});
    CHECK(mse(b, c.dequantize()) == 0.0);
}

TEST_CASE("uq constant input") {
    const UqCode c = uq_grid(DenseMatrix(3, 3, 4.5), 2);
    CHECK(c.scale == 0.0);
    CHECK(c.bias == 4.5);
    CHECK(c.dequantize() == DenseMatrix(3, 3, 4.5));
}

TEST_CASE("uq grid search never loses to min-max") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const DenseMatrix w = io::gen_gaussian(64, 64, seed);
        for (std::uint32_t bits : {1u, 2u, 3u}) {
            const double grid = mse(w, uq_grid(w, bits).dequantize());
            const double naive = naive_uq_mse(w, bits, w.min(), w.max());
            CHECK(grid <= naive + 1e-15);
            CHECK(mse(w, uq_minmax(w, bits).dequantize()) == doctest::Approx(naive).epsilon(1e-12));
        }
    }
}

TEST_CASE("uq grid search matches an exhaustive oracle") {
    const DenseMatrix w = io::gen_gaussian(16, 16, 5);
    const std::size_t n_split = 12;
    const double mean = w.mean();
    double best = INFINITY;
    for (std::size_t i = 0; i < n_split; ++i)
        for (std::size_t j = 0; j < n_split; ++j) {
            const double hi = mean + (w.max() - mean) * static_cast<double>(i) / (n_split - 1);
            const double lo = w.min() + (mean - w.min()) * static_cast<double>(j) / (n_split - 1);
            if (hi <= lo)
                continue;
            best = std::min(best, naive_uq_mse(w, 2, lo, hi));
        }
    CHECK(mse(w, uq_grid(w, 2, n_split).dequantize()) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("uq output is a fixed point and lies on one progression") {
    const DenseMatrix w = io::gen_gaussian(20, 20, 8);
    const UqCode c = uq_grid(w, 3);
    for (auto q : c.indices)
        CHECK(q < 8);
    const DenseMatrix d = c.dequantize();
    for (double v : d.values()) {
        const double k = (v - c.bias) / c.scale;
        CHECK(std::abs(k - std::round(k)) < 1e-9);
    }
    CHECK(c.footprint().total_bits == 3 * 400 + 64);
    // Re-quantizing the dequantized matrix loses nothing.
    CHECK(mse(d, uq_grid(d, 3).dequantize()) < 1e-24);
    CHECK_THROWS_AS(uq_grid(w, 0), MatrixError);
    CHECK_THROWS_AS(uq_grid(w, 2, 1), MatrixError);
}

TEST_CASE("bcq exact sign matrices and zero input") {
    CounterRng rng(3);
    DenseMatrix w(6, 5);
    for (auto& v : w.values())
        v = rng.below(2) ? -2.5 : 2.5;
    const BcqCode c = bcq(w, 1);
    CHECK(c.scales[0] == doctest::Approx(2.5));
    CHECK(mse(w, c.dequantize()) < 1e-24);

    const BcqCode z = bcq(DenseMatrix(3, 3, 0.0), 3);
    for (double a : z.scales)
        CHECK(a == 0.0);
    CHECK(z.dequantize() == DenseMatrix(3, 3, 0.0));
}

TEST_CASE("bcq first round is the closed-form sign optimum") {
    const DenseMatrix w = standardize(io::gen_gaussian(64, 64, 2)).matrix;
    double abs_mean = 0.0, sq_mean = 0.0;
    for (double v : w.values()) {
        abs_mean += std::abs(v);
        sq_mean += v * v;
    }
    abs_mean /= static_cast<double>(w.size());
    sq_mean /= static_cast<double>(w.size());
    const BcqCode c = bcq(w, 1);
    CHECK(c.scales[0] == doctest::Approx(abs_mean).epsilon(1e-12));
    CHECK(mse(w, c.dequantize()) == doctest::Approx(sq_mean - abs_mean * abs_mean).epsilon(1e-10));
}

TEST_CASE("bcq error decreases with rounds and scales stay non-negative") {
    const DenseMatrix w = io::gen_gaussian(64, 64, 4);
    double prev = INFINITY;
    for (std::size_t p = 1; p <= 4; ++p) {
        std::vector<double> norms;
        const BcqCode c = bcq(w, p, &norms);
        REQUIRE(norms.size() == p);
        for (std::size_t k = 1; k < norms.size(); ++k)
            CHECK(norms[k] <= norms[k - 1]);
        for (double a : c.scales)
            CHECK(a >= 0.0);
        const double err = mse(w, c.dequantize());
        CHECK(err == doctest::Approx(norms.back() / static_cast<double>(w.size())).epsilon(1e-9));
        CHECK(err < prev);
        prev = err;
        CHECK(c.footprint().total_bits == p * 4096 + 32 * p);
    }
}

TEST_CASE("svd baseline against a Gram eigendecomposition") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const DenseMatrix w = io::gen_gaussian(32, 32, seed);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(w.eigen().transpose() * w.eigen()));
        const std::size_t rank = 8;
        double tail = 0.0;
        for (Eigen::Index j = 0; j < 32 - static_cast<Eigen::Index>(rank); ++j)
            tail += std::max(0.0, eig.eigenvalues()(j));
        const SvdCode c = svd_lowrank(w, rank);
        const double residual = (w.eigen() - c.dequantize().eigen()).squaredNorm();
        CHECK(residual == doctest::Approx(tail).epsilon(1e-8));
        CHECK(c.footprint().total_bits == 32u * 8 * 64);
    }
}

TEST_CASE("svd baseline exact cases and rank bounds") {
    const DenseMatrix w = io::gen_gaussian(6, 4, 1);
    CHECK(mse(w, svd_lowrank(w, 4).dequantize()) < 1e-24);
    const DenseMatrix r1 = io::gen_lowrank_noise(7, 5, 1, 0.0, 2);
    CHECK(mse(r1, svd_lowrank(r1, 1).dequantize()) < 1e-24);
    CHECK_THROWS_AS(svd_lowrank(w, 0), MatrixError);
    CHECK_THROWS_AS(svd_lowrank(w, 5), MatrixError);
}

TEST_CASE("svd with quantized factors") {
    const DenseMatrix w = io::gen_lowrank_noise(24, 20, 3, 0.01, 3);
    const SvdCode c = svd_uq(w, 3, 4);
    REQUIRE(c.left_q);
    REQUIRE(c.right_q);
    CHECK(c.left_q->rows == 24);
    CHECK(c.right_q->cols == 20);
    const DenseMatrix manual(RowMajorMatrix(c.left_q->dequantize().eigen() * c.right_q->dequantize().eigen()));
    CHECK(c.dequantize() == manual);
    CHECK(c.footprint().total_bits == 4u * 3 * (24 + 20) + 4 * 32);
    CHECK(mse(w, c.dequantize()) < 0.1 * mse(w, DenseMatrix(24, 20, w.mean())));
}

TEST_CASE("vq with one centroid per distinct vector is exact") {
    DenseMatrix w(4, 4);
    const double rows[4][4] = {{1, 2, 1, 2}, {3, 4, 3, 4}, {1, 2, 5, 6}, {5, 6, 3, 4}};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            w(i, j) = rows[i][j];
    const VqCode c = vq_kmeans(w, 2, 3, 0);
    CHECK(mse(w, c.dequantize()) == 0.0);
    for (auto a : c.assignments)
        CHECK(a < 3);
    CHECK(VqCode::index_bits(3) == 2);
    CHECK(VqCode::index_bits(256) == 8);
    CHECK(VqCode::index_bits(257) == 9);
    CHECK(VqCode::index_bits(1) == 0);
}

TEST_CASE("vq two separated clusters give the cluster means") {
    // Vectors (0,0),(0,1),(1,0) and (10,10),(10,11),(12,10).
    const DenseMatrix w{{0, 0, 0, 1, 1, 0}, {10, 10, 10, 11, 12, 10}};
    const VqCode c = vq_kmeans(w, 2, 2, 1);
    std::set<std::pair<double, double>> centroids;
    for (Eigen::Index k = 0; k < 2; ++k)
        centroids.insert({c.codebook(k, 0), c.codebook(k, 1)});
    CHECK(centroids.count({1.0 / 3, 1.0 / 3}) == 1);
    CHECK(centroids.count({32.0 / 3, 31.0 / 3}) == 1);
}

TEST_CASE("vq objective is monotone, padding is ignored") {
    const DenseMatrix w = io::gen_gaussian(15, 13, 6);  // 195 values, padded to 196
    const VqCode c = vq_kmeans(w, 4, 16, 6);
    REQUIRE(c.objective_trace.size() >= 2);
    for (std::size_t k = 1; k < c.objective_trace.size(); ++k)
        CHECK(c.objective_trace[k] <= c.objective_trace[k - 1] * (1 + 1e-12));
    CHECK(c.assignments.size() == 49);
    CHECK(c.dequantize().rows() == 15);
    CHECK(c.footprint().total_bits == 49u * 4 + 16 * 4 * 32);
    CHECK_THROWS_AS(vq_kmeans(w, 4, 50, 0), MatrixError);
    CHECK(vq_kmeans(w, 4, 16, 6).assignments == c.assignments);
}

TEST_CASE("vq with quantized centroids") {
    const DenseMatrix w = io::gen_gaussian(32, 32, 7);
    const VqCode c = vq_kmeans(w, 8, 32, 7, 3);
    REQUIRE(c.codebook_q);
    CHECK(c.footprint().total_bits == 128u * 5 + 32 * 8 * 3 + 64);
    // Each vector uses its nearest quantized centroid.
    const RowMajorMatrix book = c.codebook_q->dequantize().eigen();
    for (std::size_t v = 0; v < c.assignments.size(); ++v) {
        Eigen::Map<const Eigen::RowVectorXd> x(w.values().data() + v * 8, 8);
        const double mine = (x - book.row(c.assignments[v])).squaredNorm();
        for (Eigen::Index k = 0; k < book.rows(); ++k)
            CHECK(mine <= (x - book.row(k)).squaredNorm() + 1e-12);
    }
}

TEST_CASE("e8 codebook") {
    const auto& book = e8_codebook();
    CHECK(book.size() == 240);
    std::set<E8Vector> distinct(book.begin(), book.end());
    CHECK(distinct.size() == 240);
    int integral = 0;
    for (const auto& v : book) {
        double n2 = 0.0;
        for (double x : v)
            n2 += x * x;
        CHECK(n2 == 2.0);
        E8Vector neg;
        for (std::size_t j = 0; j < 8; ++j)
            neg[j] = -v[j];
        CHECK(distinct.count(neg) == 1);
        bool half = std::abs(v[0]) == 0.5;
        if (!half) {
            ++integral;
            int nonzero = 0;
            for (double x : v)
                nonzero += x != 0.0;
            CHECK(nonzero == 2);
        } else {
            int minus = 0;
            for (double x : v) {
                CHECK(std::abs(x) == 0.5);
                minus += x < 0;
            }
            CHECK(minus % 2 == 0);
        }
    }
    CHECK(integral == 112);
}

TEST_CASE("e8 scaled codeword is exact in one round") {
    const auto& book = e8_codebook();
    DenseMatrix w(1, 8);
    for (std::size_t j = 0; j < 8; ++j)
        w(0, j) = 3.0 * book[150][j];
    const E8Code c = e8_lvq(w, 1, 0);
    CHECK(c.rounds[0].indices[0] == 150);
    CHECK(c.rounds[0].scales[0] == doctest::Approx(3.0));
    CHECK(mse(w, c.dequantize()) < 1e-28);
}

TEST_CASE("e8 residual decreases over rounds") {
    const DenseMatrix w = io::gen_gaussian(16, 16, 0);
    const E8Code c = e8_lvq(w, 4, 2);
    REQUIRE(c.residual_sq_norms.size() == 4);
    CHECK(c.residual_sq_norms[0] < w.squared_norm());
    for (std::size_t k = 1; k < 4; ++k)
        CHECK(c.residual_sq_norms[k] < c.residual_sq_norms[k - 1]);
    CHECK(c.residual_sq_norms.back() == doctest::Approx((w.eigen() - c.dequantize().eigen()).squaredNorm()));
    CHECK(c.footprint().total_bits == 4u * 32 * (8 + 2) + 8 * 32);
    for (const auto& r : c.rounds)
        for (auto idx : r.indices)
            CHECK(idx < 240);
    CHECK_THROWS_AS(e8_lvq(w, 0), MatrixError);
}

TEST_CASE("e8 padding") {
    const DenseMatrix w = io::gen_gaussian(3, 5, 4);  // 15 values, one pad
    const E8Code c = e8_lvq(w, 2, 0);
    CHECK(c.pad_len == 1);
    CHECK(c.rounds[0].indices.size() == 2);
    CHECK(c.dequantize().cols() == 5);
    CHECK(c.footprint().total_bits == 2u * 2 * 8 + 2 * 2 * 32);
}
