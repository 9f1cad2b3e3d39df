#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bqq/matrix.hpp"
#include "bqq/pubo.hpp"

namespace bqq {

using pubo::AnnealParams;

struct ScalingFactors {
    double r = 0.0;
    double s = 0.0;
    double t = 0.0;
    double u = 0.0;

    bool operator==(const ScalingFactors&) const = default;
};

// One term r*Y*Z + s*Y*1_Z + t*1_Y*Z + u*1 of the decomposition.
struct BqqStack {
    BitMatrix y;  // m x l
    BitMatrix z;  // l x n
    ScalingFactors scales;

    std::size_t rows() const { return y.rows(); }
    std::size_t cols() const { return z.cols(); }
    std::size_t inner() const { return y.cols(); }

    bool operator==(const BqqStack&) const = default;
};

struct BqqCode {
    std::vector<BqqStack> stacks;
    double u_total = 0.0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t l = 0;
    std::optional<StandardizationRecord> standardization;

    std::size_t p() const { return stacks.size(); }
    MemoryFootprint footprint(std::uint32_t scalar_bits = 32) const { return bqq_footprint(rows, cols, l, p(), scalar_bits); }
    void validate() const;

    bool operator==(const BqqCode&) const = default;
};

// round(l_scale * m n / (m + n)), at least 1.
std::size_t intermediate_dim(std::size_t m, std::size_t n, double l_scale = 1.0);

// Reconstruction of one stack without the per-stack bias.
RowMajorMatrix stack_product(const BqqStack& stack);
RowMajorMatrix dequantize_stack(const BqqStack& stack);
DenseMatrix dequantize(const BqqCode& code);

// Relaxed objective: the squared error at the expectations plus the
// variance corrections that make it exact under y^2 = y. Y and Z may be
// real-valued; on binary inputs it equals ||R - (rYZ + sY1 + t1Z + u1)||^2.
double l_pubo(const RowMajorMatrix& residual, const RowMajorMatrix& y, const RowMajorMatrix& z,
              const ScalingFactors& f);

struct PuboGradient {
    RowMajorMatrix y;  // m x l
    RowMajorMatrix z;  // l x n
};

PuboGradient l_pubo_grad(const RowMajorMatrix& residual, const RowMajorMatrix& y, const RowMajorMatrix& z,
                         const ScalingFactors& f);

// Closed-form (r, s, t, u) minimizing l_pubo for fixed Y, Z. Rank-deficient
// normal equations resolve to the least-norm minimizer.
ScalingFactors sfo(const RowMajorMatrix& y, const RowMajorMatrix& z, const RowMajorMatrix& residual);

// l_pubo viewed as a PUBO over the flattened state [vec(Y); vec(Z)] (row-major
// blocks). Scalars may be updated between descent steps.
class SubproblemObjective final : public pubo::PuboProblem {
public:
    SubproblemObjective(const RowMajorMatrix& residual, std::size_t l);

    std::size_t num_vars() const override { return (m_ + n_) * l_; }
    double mean_field_energy(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> grad) const override;

    void set_scales(const ScalingFactors& f) { scales_ = f; }
    const ScalingFactors& scales() const { return scales_; }
    const RowMajorMatrix& residual() const { return *residual_; }

    Eigen::Map<const RowMajorMatrix> y_view(std::span<const double> x) const;
    Eigen::Map<const RowMajorMatrix> z_view(std::span<const double> x) const;

private:
    const RowMajorMatrix* residual_;
    std::size_t m_, n_, l_;
    ScalingFactors scales_;
};

// Subproblem solver: relaxed Y, Z annealed by mean-field descent with a
// scalar refit after every step, then binarized and refit exactly.
BqqStack solve_subproblem(const DenseMatrix& residual, const AnnealParams& params, std::size_t l, std::uint64_t seed);

// Greedy stacking over successive residuals. If residual_sq_norms is given it
// receives ||W_res||^2 before the first stack and after each stack (p+1 values).
BqqCode bqq_quantize(const DenseMatrix& w, std::size_t p, double l_scale, const AnnealParams& params,
                     std::uint64_t seed, std::vector<double>* residual_sq_norms = nullptr);

// Same, but standardizes first and attaches the record to the code.
BqqCode bqq_quantize_standardized(const DenseMatrix& w, std::size_t p, double l_scale, const AnnealParams& params,
                                  std::uint64_t seed);

// Feasible stack built from sign patterns of the rank-l singular factors
// (singular values folded into U), with SFO-optimal scalars.
BqqStack sign_svd_stack(const DenseMatrix& w, std::size_t l);

// sqrt(sum_{j>l} sigma_j^2) + ||W_l - alpha* S||, S = sgn(U_l Sigma_l) sgn(V_l^T),
// alpha* = <W_l, S> / ||S||^2. Requires l < min(m, n).
double error_upper_bound(const DenseMatrix& w, std::size_t l);

struct OpWeights {
    double w_and = 1.0;
    double w_add = 1.0;
    double w_mul = 1.0;
};

struct OpCounts {
    std::uint64_t and_ops = 0;
    std::uint64_t add_ops = 0;
    std::uint64_t mul_ops = 0;

    double weighted(const OpWeights& w) const {
        return w.w_and * static_cast<double>(and_ops) + w.w_add * static_cast<double>(add_ops) +
               w.w_mul * static_cast<double>(mul_ops);
    }
};

struct CostReport {
    OpCounts first_order;
    OpCounts bqq;
    double ratio = 0.0;
};

// Operation counts of a 1-bit first-order layer versus a one-stack BQQ layer
// applied to an n x d input.
CostReport inference_cost(std::uint64_t m, std::uint64_t n, std::uint64_t l, std::uint64_t d,
                          const OpWeights& weights = {});

} // namespace bqq
