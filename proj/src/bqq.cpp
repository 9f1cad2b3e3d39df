#include "bqq/bqq.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bqq/random.hpp"
#include "bqq/svd.hpp"

namespace bqq {

namespace {

void check_shapes(const RowMajorMatrix& residual, const RowMajorMatrix& y, const RowMajorMatrix& z) {
    if (y.rows() != residual.rows() || z.cols() != residual.cols() || y.cols() != z.rows())
        throw MatrixError("bqq: incompatible shapes R " + std::to_string(residual.rows()) + "x" +
                          std::to_string(residual.cols()) + ", Y " + std::to_string(y.rows()) + "x" +
                          std::to_string(y.cols()) + ", Z " + std::to_string(z.rows()) + "x" +
                          std::to_string(z.cols()));
}

template <class MatY, class MatZ>
RowMajorMatrix prediction(const MatY& y, const MatZ& z, const ScalingFactors& f, RowMajorMatrix* product = nullptr) {
    RowMajorMatrix yz = y * z;
    const Eigen::VectorXd yr = y.rowwise().sum();
    const Eigen::RowVectorXd zc = z.colwise().sum();
    RowMajorMatrix pred = f.r * yz;
    pred.colwise() += f.s * yr;
    pred.rowwise() += f.t * zc;
    pred.array() += f.u;
    if (product)
        *product = std::move(yz);
    return pred;
}

// Sums shared by the variance corrections.
struct CorrectionSums {
    double yz, y2z2, y2z, yz2;  // sums of YZ, (Y.Y)(Z.Z), (Y.Y)Z, Y(Z.Z)
    double y, y2, z, z2;        // sums of Y, Y.Y, Z, Z.Z
};

template <class MatY, class MatZ>
CorrectionSums correction_sums(const MatY& y, const MatZ& z) {
    const Eigen::RowVectorXd yc = y.colwise().sum();
    const Eigen::RowVectorXd yc2 = y.array().square().matrix().colwise().sum();
    const Eigen::VectorXd zr = z.rowwise().sum();
    const Eigen::VectorXd zr2 = z.array().square().matrix().rowwise().sum();
    return {yc.dot(zr), yc2.dot(zr2), yc2.dot(zr), yc.dot(zr2), yc.sum(), yc2.sum(), zr.sum(), zr2.sum()};
}

template <class MatY, class MatZ>
double l_pubo_impl(const RowMajorMatrix& residual, const MatY& y, const MatZ& z, const ScalingFactors& f) {
    const double m = static_cast<double>(residual.rows());
    const double n = static_cast<double>(residual.cols());
    const double l_sub = (residual - prediction(y, z, f)).squaredNorm();
    const CorrectionSums c = correction_sums(y, z);
    return l_sub + f.r * f.r * (c.yz - c.y2z2) + f.s * f.s * n * (c.y - c.y2) + f.t * f.t * m * (c.z - c.z2) +
           2.0 * f.r * f.s * (c.yz - c.y2z) + 2.0 * f.r * f.t * (c.yz - c.yz2);
}

template <class MatY, class MatZ, class OutY, class OutZ>
void l_pubo_grad_impl(const RowMajorMatrix& residual, const MatY& y, const MatZ& z, const ScalingFactors& f,
                      OutY&& gy, OutZ&& gz) {
    const double m = static_cast<double>(residual.rows());
    const double n = static_cast<double>(residual.cols());
    const double r = f.r, s = f.s, t = f.t;

    const RowMajorMatrix err = residual - prediction(y, z, f);
    const Eigen::VectorXd err_rows = err.rowwise().sum();
    const Eigen::RowVectorXd err_cols = err.colwise().sum();

    gy.noalias() = (-2.0 * r) * (err * z.transpose());
    gy.colwise() -= 2.0 * s * err_rows;
    gz.noalias() = (-2.0 * r) * (y.transpose() * err);
    gz.rowwise() -= 2.0 * t * err_cols;

    const Eigen::RowVectorXd yc = y.colwise().sum();
    const Eigen::RowVectorXd yc2 = y.array().square().matrix().colwise().sum();
    const Eigen::VectorXd zr = z.rowwise().sum();
    const Eigen::VectorXd zr2 = z.array().square().matrix().rowwise().sum();

    // d/dY_ja: r^2 (zr_a - 2 Y_ja zr2_a) + s^2 n (1 - 2 Y_ja) + 2rs (1 - 2 Y_ja) zr_a + 2rt (zr_a - zr2_a)
    const Eigen::RowVectorXd y_const =
        (r * r * zr + 2.0 * r * s * zr + 2.0 * r * t * (zr - zr2)).transpose().array() + s * s * n;
    const Eigen::RowVectorXd y_lin = -2.0 * (r * r * zr2 + 2.0 * r * s * zr).transpose().array() - 2.0 * s * s * n;
    gy.rowwise() += y_const;
    gy.array() += y.array().rowwise() * y_lin.array();

    // d/dZ_ak: r^2 (yc_a - 2 Z_ak yc2_a) + t^2 m (1 - 2 Z_ak) + 2rs (yc_a - yc2_a) + 2rt (1 - 2 Z_ak) yc_a
    const Eigen::VectorXd z_const =
        (r * r * yc + 2.0 * r * s * (yc - yc2) + 2.0 * r * t * yc).transpose().array() + t * t * m;
    const Eigen::VectorXd z_lin = -2.0 * (r * r * yc2 + 2.0 * r * t * yc).transpose().array() - 2.0 * t * t * m;
    gz.colwise() += z_const;
    gz.array() += z.array().colwise() * z_lin.array();
}

template <class MatY, class MatZ>
ScalingFactors sfo_impl(const MatY& y, const MatZ& z, const RowMajorMatrix& residual) {
    const double m = static_cast<double>(residual.rows());
    const double n = static_cast<double>(residual.cols());

    const RowMajorMatrix yz = y * z;
    const Eigen::VectorXd yr = y.rowwise().sum();
    const Eigen::RowVectorXd zc = z.colwise().sum();
    const CorrectionSums c = correction_sums(y, z);

    // Gram matrix of the design {YZ, Y1_Z, 1_Y Z, 1} plus variance corrections.
    Eigen::Matrix4d g;
    g(0, 0) = yz.squaredNorm() + (c.yz - c.y2z2);
    g(0, 1) = yz.rowwise().sum().dot(yr) + (c.yz - c.y2z);
    g(0, 2) = yz.colwise().sum().dot(zc) + (c.yz - c.yz2);
    g(0, 3) = c.yz;
    g(1, 1) = n * yr.squaredNorm() + n * (c.y - c.y2);
    g(1, 2) = c.y * c.z;
    g(1, 3) = n * c.y;
    g(2, 2) = m * zc.squaredNorm() + m * (c.z - c.z2);
    g(2, 3) = m * c.z;
    g(3, 3) = m * n;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < i; ++j)
            g(i, j) = g(j, i);

    Eigen::Vector4d b;
    b(0) = residual.cwiseProduct(yz).sum();
    b(1) = residual.rowwise().sum().dot(yr);
    b(2) = residual.colwise().sum().dot(zc);
    b(3) = residual.sum();

    // Diagonal scaling, then a thresholded eigen pseudo-inverse. Zero
    // columns (e.g. Y == 0) get zero coefficients.
    Eigen::Vector4d d;
    for (int i = 0; i < 4; ++i)
        d(i) = g(i, i) > 0.0 ? 1.0 / std::sqrt(g(i, i)) : 0.0;
    const Eigen::Matrix4d gs = d.asDiagonal() * g * d.asDiagonal();
    const Eigen::Vector4d bs = d.cwiseProduct(b);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(gs);
    const Eigen::Vector4d lambda = eig.eigenvalues();
    const double cutoff = 1e-12 * std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::Vector4d inv;
    for (int i = 0; i < 4; ++i)
        inv(i) = lambda(i) > cutoff ? 1.0 / lambda(i) : 0.0;
    const Eigen::Vector4d theta_s = eig.eigenvectors() * inv.asDiagonal() * (eig.eigenvectors().transpose() * bs);
    const Eigen::Vector4d theta = d.cwiseProduct(theta_s);
    return {theta(0), theta(1), theta(2), theta(3)};
}

} // namespace

void BqqCode::validate() const {
    if (rows == 0 || cols == 0 || l == 0)
        throw MatrixError("BqqCode: zero dimension");
    for (const auto& st : stacks)
        if (st.y.rows() != rows || st.y.cols() != l || st.z.rows() != l || st.z.cols() != cols)
            throw MatrixError("BqqCode: stack shape mismatch");
}

std::size_t intermediate_dim(std::size_t m, std::size_t n, double l_scale) {
    if (m == 0 || n == 0 || !(l_scale > 0.0))
        throw MatrixError("intermediate_dim: dimensions and l_scale must be positive");
    const double raw = l_scale * static_cast<double>(m) * static_cast<double>(n) / static_cast<double>(m + n);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(raw)));
}

RowMajorMatrix stack_product(const BqqStack& stack) {
    const RowMajorMatrix y = stack.y.to_eigen();
    const RowMajorMatrix z = stack.z.to_eigen();
    ScalingFactors f = stack.scales;
    f.u = 0.0;
    return prediction(y, z, f);
}

RowMajorMatrix dequantize_stack(const BqqStack& stack) {
    RowMajorMatrix out = stack_product(stack);
    out.array() += stack.scales.u;
    return out;
}

DenseMatrix dequantize(const BqqCode& code) {
    RowMajorMatrix out = RowMajorMatrix::Constant(code.rows, code.cols, code.u_total);
    for (const auto& st : code.stacks)
        out += stack_product(st);
    DenseMatrix dense(std::move(out));
    if (code.standardization)
        return destandardize(dense, *code.standardization);
    return dense;
}

double l_pubo(const RowMajorMatrix& residual, const RowMajorMatrix& y, const RowMajorMatrix& z,
              const ScalingFactors& f) {
    check_shapes(residual, y, z);
    return l_pubo_impl(residual, y, z, f);
}

PuboGradient l_pubo_grad(const RowMajorMatrix& residual, const RowMajorMatrix& y, const RowMajorMatrix& z,
                         const ScalingFactors& f) {
    check_shapes(residual, y, z);
    PuboGradient g{RowMajorMatrix(y.rows(), y.cols()), RowMajorMatrix(z.rows(), z.cols())};
    l_pubo_grad_impl(residual, y, z, f, g.y, g.z);
    return g;
}

ScalingFactors sfo(const RowMajorMatrix& y, const RowMajorMatrix& z, const RowMajorMatrix& residual) {
    check_shapes(residual, y, z);
    return sfo_impl(y, z, residual);
}

SubproblemObjective::SubproblemObjective(const RowMajorMatrix& residual, std::size_t l)
    : residual_(&residual), m_(static_cast<std::size_t>(residual.rows())),
      n_(static_cast<std::size_t>(residual.cols())), l_(l) {
    if (l == 0 || residual.size() == 0)
        throw MatrixError("SubproblemObjective: empty problem");
}

Eigen::Map<const RowMajorMatrix> SubproblemObjective::y_view(std::span<const double> x) const {
    return {x.data(), static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(l_)};
}

Eigen::Map<const RowMajorMatrix> SubproblemObjective::z_view(std::span<const double> x) const {
    return {x.data() + m_ * l_, static_cast<Eigen::Index>(l_), static_cast<Eigen::Index>(n_)};
}

double SubproblemObjective::mean_field_energy(std::span<const double> x) const {
    if (x.size() != num_vars())
        throw pubo::PuboError("SubproblemObjective: state size mismatch");
    return l_pubo_impl(*residual_, y_view(x), z_view(x), scales_);
}

void SubproblemObjective::gradient(std::span<const double> x, std::span<double> grad) const {
    if (x.size() != num_vars() || grad.size() != num_vars())
        throw pubo::PuboError("SubproblemObjective: gradient size mismatch");
    Eigen::Map<RowMajorMatrix> gy(grad.data(), static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(l_));
    Eigen::Map<RowMajorMatrix> gz(grad.data() + m_ * l_, static_cast<Eigen::Index>(l_), static_cast<Eigen::Index>(n_));
    l_pubo_grad_impl(*residual_, y_view(x), z_view(x), scales_, gy, gz);
}

BqqStack solve_subproblem(const DenseMatrix& residual, const AnnealParams& params, std::size_t l, std::uint64_t seed) {
    if (residual.empty())
        throw MatrixError("solve_subproblem: empty residual");
    if (l == 0)
        throw MatrixError("solve_subproblem: l must be positive");
    params.validate();

    const std::size_t m = residual.rows();
    const std::size_t n = residual.cols();
    const double range = residual.max() - residual.min();
    if (!(range > 0.0))
        return {BitMatrix(m, l), BitMatrix(l, n), {0.0, 0.0, 0.0, residual(0, 0)}};

    const RowMajorMatrix normalized = residual.eigen() / range;
    SubproblemObjective objective(normalized, l);
    const std::size_t nvars = objective.num_vars();

    pubo::MeanFieldState state;
    state.x_old.resize(nvars);
    state.x_cur.resize(nvars);
    CounterRng rng(seed, 0x5eed);
    for (std::size_t i = 0; i < nvars; ++i) {
        state.x_old[i] = rng.uniform();
        state.x_cur[i] = state.x_old[i] - params.eta * (state.x_old[i] - 0.5);
    }
    state.temperature = params.t_init;
    const double dt = params.delta_t();

    objective.set_scales(sfo_impl(objective.y_view(state.x_cur), objective.z_view(state.x_cur), normalized));
    pubo::StepWorkspace work;
    for (std::size_t step = 0; step < params.n_step; ++step) {
        pubo::amfd_step_inplace(state, objective, params.eta, params.zeta, dt, work);
        objective.set_scales(sfo_impl(objective.y_view(state.x_cur), objective.z_view(state.x_cur), normalized));
    }

    BqqStack out;
    out.y = BitMatrix::threshold(RowMajorMatrix(objective.y_view(state.x_cur)));
    out.z = BitMatrix::threshold(RowMajorMatrix(objective.z_view(state.x_cur)));
    const ScalingFactors f = sfo_impl(out.y.to_eigen(), out.z.to_eigen(), normalized);
    out.scales = {range * f.r, range * f.s, range * f.t, range * f.u};
    return out;
}

namespace {

std::uint64_t stack_seed(std::uint64_t seed, std::size_t index) {
    CounterRng rng(seed, 0x57ac + index);
    return rng.next_u64();
}

} // namespace

BqqCode bqq_quantize(const DenseMatrix& w, std::size_t p, double l_scale, const AnnealParams& params,
                     std::uint64_t seed, std::vector<double>* residual_sq_norms) {
    if (p == 0)
        throw MatrixError("bqq_quantize: p must be at least 1");
    if (w.empty())
        throw MatrixError("bqq_quantize: empty matrix");
    BqqCode code;
    code.rows = w.rows();
    code.cols = w.cols();
    code.l = intermediate_dim(w.rows(), w.cols(), l_scale);

    DenseMatrix res = w;
    if (residual_sq_norms) {
        residual_sq_norms->clear();
        residual_sq_norms->push_back(res.squared_norm());
    }
    for (std::size_t i = 0; i < p; ++i) {
        BqqStack st = solve_subproblem(res, params, code.l, stack_seed(seed, i));
        res.eigen() -= dequantize_stack(st);
        code.u_total += st.scales.u;
        code.stacks.push_back(std::move(st));
        if (residual_sq_norms)
            residual_sq_norms->push_back(res.squared_norm());
    }
    return code;
}

BqqCode bqq_quantize_standardized(const DenseMatrix& w, std::size_t p, double l_scale, const AnnealParams& params,
                                  std::uint64_t seed) {
    Standardized st = standardize(w);
    BqqCode code = bqq_quantize(st.matrix, p, l_scale, params, seed);
    code.standardization = st.record;
    return code;
}

namespace {

struct SignFactors {
    RowMajorMatrix left;   // sgn(U_l Sigma_l), m x l
    RowMajorMatrix right;  // sgn(V_l^T), l x n
    RowMajorMatrix lowrank;
    double tail = 0.0;
};

SignFactors sign_factors(const DenseMatrix& w, std::size_t l) {
    const std::size_t k = std::min(w.rows(), w.cols());
    if (l == 0 || l >= k)
        throw MatrixError("error bound: need 1 <= l < min(m, n) = " + std::to_string(k) + ", got l = " +
                          std::to_string(l));
    const Svd svd = jacobi_svd(w.eigen());
    const auto li = static_cast<Eigen::Index>(l);
    const RowMajorMatrix us = svd.u.leftCols(li) * svd.sigma.head(li).asDiagonal();
    const RowMajorMatrix vt = svd.v.leftCols(li).transpose();
    auto sgn = [](double v) { return v >= 0.0 ? 1.0 : -1.0; };
    return {us.unaryExpr(sgn), vt.unaryExpr(sgn), us * vt, tail_norm(svd, l)};
}

} // namespace

BqqStack sign_svd_stack(const DenseMatrix& w, std::size_t l) {
    const SignFactors sf = sign_factors(w, l);
    const RowMajorMatrix y = (sf.left.array() + 1.0) * 0.5;
    const RowMajorMatrix z = (sf.right.array() + 1.0) * 0.5;
    BqqStack st{BitMatrix::threshold(y), BitMatrix::threshold(z), {}};
    st.scales = sfo_impl(y, z, w.eigen());
    return st;
}

double error_upper_bound(const DenseMatrix& w, std::size_t l) {
    const SignFactors sf = sign_factors(w, l);
    const RowMajorMatrix sign_product = sf.left * sf.right;
    const double denom = sign_product.squaredNorm();
    const double alpha = denom > 0.0 ? sf.lowrank.cwiseProduct(sign_product).sum() / denom : 0.0;
    return sf.tail + (sf.lowrank - alpha * sign_product).norm();
}

CostReport inference_cost(std::uint64_t m, std::uint64_t n, std::uint64_t l, std::uint64_t d,
                          const OpWeights& weights) {
    if (m == 0 || n == 0 || l == 0 || d == 0)
        throw MatrixError("inference_cost: all dimensions must be positive");
    CostReport rep;
    rep.first_order = {m * n * d, m * d * (n - 1), m * d};
    // d[(m+n+1)l + n - m - 2] in signed arithmetic; it is non-negative for l >= 1.
    const auto add = static_cast<std::int64_t>((m + n + 1) * l + n) - static_cast<std::int64_t>(m) - 2;
    rep.bqq = {l * d * (m + n), static_cast<std::uint64_t>(std::max<std::int64_t>(add, 0)) * d, 3 * l * d};
    rep.ratio = rep.bqq.weighted(weights) / rep.first_order.weighted(weights);
    return rep;
}

} // namespace bqq
