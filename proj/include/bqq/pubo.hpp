#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace bqq::pubo {

class PuboError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A polynomial objective over N binary variables together with its
// multilinear extension to [0,1]^N. Implementations must be reentrant.
class PuboProblem {
public:
    virtual ~PuboProblem() = default;

    virtual std::size_t num_vars() const = 0;

    // Multilinear extension L(x); equals the binary energy at every vertex.
    virtual double mean_field_energy(std::span<const double> x) const = 0;

    // grad.size() == num_vars(). x may lie outside [0,1] (forward points).
    virtual void gradient(std::span<const double> x, std::span<double> grad) const = 0;

    virtual double energy(std::span<const std::uint8_t> s) const;
};

struct Term {
    std::vector<std::uint32_t> vars;
    double coeff = 0.0;
};

// Explicit sum of monomials, L(s) = sum_k J_k prod_{i in term k} s_i.
// Repeated variables inside a term collapse (s*s = s).
class Polynomial final : public PuboProblem {
public:
    Polynomial(std::size_t num_vars, std::vector<Term> terms);

    std::size_t num_vars() const override { return num_vars_; }
    double mean_field_energy(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> grad) const override;
    double energy(std::span<const std::uint8_t> s) const override;

    const std::vector<Term>& terms() const { return terms_; }
    std::size_t degree() const;

private:
    std::size_t num_vars_;
    std::vector<Term> terms_;
};

// Every monomial of degree 1..max_degree present with a standard normal
// coefficient, scaled by coeff_scale.
Polynomial random_polynomial(std::size_t num_vars, std::size_t max_degree, std::uint64_t seed,
                             double coeff_scale = 1.0);

struct MeanFieldState {
    std::vector<double> x_cur;
    std::vector<double> x_old;
    double temperature = 0.0;
};

struct AnnealParams {
    double t_init = 0.2;
    double t_fin = 0.005;
    std::size_t n_step = 50000;
    double eta = 0.06;
    double zeta = 4.0;

    // (t_init - t_fin) / (n_step - 1), or 0 for a single step.
    double delta_t() const;
    void validate() const;
};

// L(x)/T + sum_i [(1-x_i) ln(1-x_i) + x_i ln x_i]: the KL divergence without
// the x-independent ln Z term.
double kl_objective(std::span<const double> x, const PuboProblem& problem, double temperature);

// Full KL divergence, with ln Z by enumeration (num_vars <= 24).
double kl_divergence(std::span<const double> x, const PuboProblem& problem, double temperature);

double log_partition(const PuboProblem& problem, double temperature);

// Scratch buffers reused across steps.
struct StepWorkspace {
    std::vector<double> forward;
    std::vector<double> grad;
};

// One accelerated mean-field descent iteration:
//   x_fwd = x_cur + zeta (x_cur - x_old)
//   x_new = clip(2 x_cur - x_old - eta (T (x_cur - 0.5) + grad L(x_fwd)), 0, 1)
//   T    -= delta_T
void amfd_step_inplace(MeanFieldState& state, const PuboProblem& problem, double eta, double zeta,
                       double delta_t, StepWorkspace& work);

MeanFieldState amfd_step(const MeanFieldState& state, const PuboProblem& problem, const AnnealParams& params);

struct AnnealResult {
    MeanFieldState state;
    std::vector<std::uint8_t> solution;
    double energy = 0.0;
};

// Runs params.n_step iterations from `initial` with T starting at t_init,
// then rounds with x >= 0.5 -> 1.
AnnealResult anneal(const PuboProblem& problem, const AnnealParams& params, MeanFieldState initial);

std::vector<std::uint8_t> round_state(std::span<const double> x);

struct BruteForceResult {
    std::vector<std::uint8_t> solution;
    double energy = 0.0;
};

inline constexpr std::size_t kMaxEnumerationVars = 24;

// Exhaustive minimum; ties resolve to the lowest assignment index.
BruteForceResult brute_force_min(const PuboProblem& problem);

} // namespace bqq::pubo
