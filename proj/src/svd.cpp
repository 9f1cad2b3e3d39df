#include "bqq/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bqq {

namespace {

// Works on the tall orientation (rows >= cols).
Svd jacobi_tall(RowMajorMatrix a, double tol, int max_sweeps) {
    const Eigen::Index m = a.rows();
    const Eigen::Index n = a.cols();
    // Column access dominates; a column-major working copy keeps it contiguous.
    Eigen::MatrixXd work = a;
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (Eigen::Index p = 0; p + 1 < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double alpha = work.col(p).squaredNorm();
                const double beta = work.col(q).squaredNorm();
                const double gamma = work.col(p).dot(work.col(q));
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta))
                    continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (Eigen::Index i = 0; i < m; ++i) {
                    const double wp = work(i, p);
                    const double wq = work(i, q);
                    work(i, p) = c * wp - s * wq;
                    work(i, q) = s * wp + c * wq;
                }
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double vp = v(i, p);
                    const double vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated)
            break;
    }

    Eigen::VectorXd sigma(n);
    for (Eigen::Index j = 0; j < n; ++j)
        sigma(j) = work.col(j).norm();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return sigma(x) > sigma(y); });

    Svd out;
    out.u = RowMajorMatrix::Zero(m, n);
    out.v = RowMajorMatrix::Zero(n, n);
    out.sigma.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index j = order[static_cast<std::size_t>(k)];
        out.sigma(k) = sigma(j);
        if (sigma(j) > 0.0)
            out.u.col(k) = work.col(j) / sigma(j);
        out.v.col(k) = v.col(j);
    }
    return out;
}

} // namespace

Svd jacobi_svd(const RowMajorMatrix& w, double tol, int max_sweeps) {
    if (w.size() == 0)
        throw MatrixError("jacobi_svd: empty matrix");
    if (w.rows() >= w.cols())
        return jacobi_tall(w, tol, max_sweeps);
    Svd t = jacobi_tall(w.transpose(), tol, max_sweeps);
    return {std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

double tail_norm(const Svd& svd, std::size_t rank) {
    double acc = 0.0;
    for (Eigen::Index j = static_cast<Eigen::Index>(rank); j < svd.sigma.size(); ++j)
        acc += svd.sigma(j) * svd.sigma(j);
    return std::sqrt(acc);
}

RowMajorMatrix truncated(const Svd& svd, std::size_t rank) {
    const Eigen::Index r = std::min<Eigen::Index>(static_cast<Eigen::Index>(rank), svd.sigma.size());
    return svd.u.leftCols(r) * svd.sigma.head(r).asDiagonal() * svd.v.leftCols(r).transpose();
}

} // namespace bqq
