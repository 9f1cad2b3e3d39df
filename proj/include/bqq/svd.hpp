#pragma once

#include "bqq/matrix.hpp"

namespace bqq {

// Thin SVD W = U diag(sigma) V^T with k = min(m, n), sigma descending.
struct Svd {
    RowMajorMatrix u;       // m x k
    Eigen::VectorXd sigma;  // k
    RowMajorMatrix v;       // n x k
};

// One-sided (Hestenes) Jacobi. Sweeps until every column pair satisfies
// |<a_p, a_q>| <= tol * |a_p| |a_q|.
Svd jacobi_svd(const RowMajorMatrix& w, double tol = 1e-10, int max_sweeps = 100);

// sqrt(sum_{j >= rank} sigma_j^2), i.e. the Eckart-Young residual.
double tail_norm(const Svd& svd, std::size_t rank);

// U_r diag(sigma_r) V_r^T.
RowMajorMatrix truncated(const Svd& svd, std::size_t rank);

} // namespace bqq
