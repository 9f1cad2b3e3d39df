#include "bqq/pubo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "bqq/random.hpp"

namespace bqq::pubo {

double PuboProblem::energy(std::span<const std::uint8_t> s) const {
    std::vector<double> x(s.begin(), s.end());
    return mean_field_energy(x);
}

Polynomial::Polynomial(std::size_t num_vars, std::vector<Term> terms) : num_vars_(num_vars) {
    if (num_vars == 0)
        throw PuboError("Polynomial: no variables");
    terms_.reserve(terms.size());
    for (auto& t : terms) {
        std::sort(t.vars.begin(), t.vars.end());
        t.vars.erase(std::unique(t.vars.begin(), t.vars.end()), t.vars.end());
        for (auto v : t.vars)
            if (v >= num_vars)
                throw PuboError("Polynomial: variable index " + std::to_string(v) + " out of range");
        if (!std::isfinite(t.coeff))
            throw PuboError("Polynomial: non-finite coefficient");
        terms_.push_back(std::move(t));
    }
}

std::size_t Polynomial::degree() const {
    std::size_t d = 0;
    for (const auto& t : terms_)
        d = std::max(d, t.vars.size());
    return d;
}

double Polynomial::mean_field_energy(std::span<const double> x) const {
    if (x.size() != num_vars_)
        throw PuboError("Polynomial: state size mismatch");
    double total = 0.0;
    for (const auto& t : terms_) {
        double prod = t.coeff;
        for (auto v : t.vars)
            prod *= x[v];
        total += prod;
    }
    return total;
}

double Polynomial::energy(std::span<const std::uint8_t> s) const {
    if (s.size() != num_vars_)
        throw PuboError("Polynomial: assignment size mismatch");
    double total = 0.0;
    for (const auto& t : terms_) {
        bool on = true;
        for (auto v : t.vars)
            on = on && s[v] != 0;
        if (on)
            total += t.coeff;
    }
    return total;
}

void Polynomial::gradient(std::span<const double> x, std::span<double> grad) const {
    if (x.size() != num_vars_ || grad.size() != num_vars_)
        throw PuboError("Polynomial: gradient size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& t : terms_) {
        for (std::size_t a = 0; a < t.vars.size(); ++a) {
            double prod = t.coeff;
            for (std::size_t b = 0; b < t.vars.size(); ++b)
                if (b != a)
                    prod *= x[t.vars[b]];
            grad[t.vars[a]] += prod;
        }
    }
}

namespace {

void enumerate_subsets(std::size_t n, std::size_t max_degree, std::size_t start, std::vector<std::uint32_t>& cur,
                       const std::function<void(const std::vector<std::uint32_t>&)>& emit) {
    for (std::size_t i = start; i < n; ++i) {
        cur.push_back(static_cast<std::uint32_t>(i));
        emit(cur);
        if (cur.size() < max_degree)
            enumerate_subsets(n, max_degree, i + 1, cur, emit);
        cur.pop_back();
    }
}

} // namespace

Polynomial random_polynomial(std::size_t num_vars, std::size_t max_degree, std::uint64_t seed, double coeff_scale) {
    CounterRng rng(seed, 0x9b0);
    std::vector<Term> terms;
    std::vector<std::uint32_t> cur;
    enumerate_subsets(num_vars, max_degree, 0, cur,
                      [&](const std::vector<std::uint32_t>& vars) { terms.push_back({vars, coeff_scale * rng.normal()}); });
    return Polynomial(num_vars, std::move(terms));
}

double AnnealParams::delta_t() const {
    if (n_step <= 1)
        return 0.0;
    return (t_init - t_fin) / static_cast<double>(n_step - 1);
}

void AnnealParams::validate() const {
    if (!(t_fin > 0.0) || !(t_init >= t_fin))
        throw PuboError("AnnealParams: require t_init >= t_fin > 0");
    if (n_step == 0)
        throw PuboError("AnnealParams: n_step must be positive");
    if (!std::isfinite(eta) || !std::isfinite(zeta))
        throw PuboError("AnnealParams: non-finite rate");
}

namespace {

double entropy_sum(std::span<const double> x) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        if (!(xi > 0.0 && xi < 1.0))
            throw PuboError("kl: x[" + std::to_string(i) + "] must lie strictly inside (0,1)");
        total += (1.0 - xi) * std::log1p(-xi) + xi * std::log(xi);
    }
    return total;
}

void check_enumerable(const PuboProblem& problem) {
    if (problem.num_vars() > kMaxEnumerationVars)
        throw PuboError("enumeration limited to " + std::to_string(kMaxEnumerationVars) + " variables, got " +
                        std::to_string(problem.num_vars()));
}

// Visits every assignment in index order; bit i of the index is s_i.
template <class Fn>
void for_each_assignment(std::size_t n, Fn&& fn) {
    std::vector<std::uint8_t> s(n, 0);
    const std::uint64_t count = std::uint64_t{1} << n;
    for (std::uint64_t idx = 0; idx < count; ++idx) {
        for (std::size_t i = 0; i < n; ++i)
            s[i] = static_cast<std::uint8_t>((idx >> i) & 1u);
        fn(idx, std::span<const std::uint8_t>(s));
    }
}

} // namespace

double kl_objective(std::span<const double> x, const PuboProblem& problem, double temperature) {
    if (!(temperature > 0.0))
        throw PuboError("kl: temperature must be positive");
    if (x.size() != problem.num_vars())
        throw PuboError("kl: state size mismatch");
    const double ent = entropy_sum(x);
    return problem.mean_field_energy(x) / temperature + ent;
}

double log_partition(const PuboProblem& problem, double temperature) {
    if (!(temperature > 0.0))
        throw PuboError("log_partition: temperature must be positive");
    check_enumerable(problem);
    std::vector<double> neg;
    neg.reserve(std::size_t{1} << problem.num_vars());
    for_each_assignment(problem.num_vars(), [&](std::uint64_t, std::span<const std::uint8_t> s) {
        neg.push_back(-problem.energy(s) / temperature);
    });
    const double peak = *std::max_element(neg.begin(), neg.end());
    double acc = 0.0;
    for (double v : neg)
        acc += std::exp(v - peak);
    return peak + std::log(acc);
}

double kl_divergence(std::span<const double> x, const PuboProblem& problem, double temperature) {
    const double partial = kl_objective(x, problem, temperature);
    return partial + log_partition(problem, temperature);
}

void amfd_step_inplace(MeanFieldState& state, const PuboProblem& problem, double eta, double zeta, double delta_t,
                       StepWorkspace& work) {
    const std::size_t n = problem.num_vars();
    if (state.x_cur.size() != n || state.x_old.size() != n)
        throw PuboError("amfd_step: state size mismatch");
    work.forward.resize(n);
    work.grad.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        work.forward[i] = state.x_cur[i] + zeta * (state.x_cur[i] - state.x_old[i]);
    problem.gradient(work.forward, work.grad);
    const double temp = state.temperature;
    for (std::size_t i = 0; i < n; ++i) {
        const double cur = state.x_cur[i];
        const double force = temp * (cur - 0.5);
        const double next = 2.0 * cur - state.x_old[i] - eta * (force + work.grad[i]);
        state.x_old[i] = cur;
        state.x_cur[i] = std::clamp(next, 0.0, 1.0);
    }
    state.temperature = temp - delta_t;
}

MeanFieldState amfd_step(const MeanFieldState& state, const PuboProblem& problem, const AnnealParams& params) {
    MeanFieldState next = state;
    StepWorkspace work;
    amfd_step_inplace(next, problem, params.eta, params.zeta, params.delta_t(), work);
    return next;
}

std::vector<std::uint8_t> round_state(std::span<const double> x) {
    std::vector<std::uint8_t> s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        s[i] = x[i] >= 0.5 ? 1 : 0;
    return s;
}

AnnealResult anneal(const PuboProblem& problem, const AnnealParams& params, MeanFieldState initial) {
    params.validate();
    AnnealResult out{std::move(initial), {}, 0.0};
    out.state.temperature = params.t_init;
    const double dt = params.delta_t();
    StepWorkspace work;
    for (std::size_t step = 0; step < params.n_step; ++step)
        amfd_step_inplace(out.state, problem, params.eta, params.zeta, dt, work);
    out.solution = round_state(out.state.x_cur);
    out.energy = problem.energy(out.solution);
    return out;
}

BruteForceResult brute_force_min(const PuboProblem& problem) {
    check_enumerable(problem);
    BruteForceResult best{std::vector<std::uint8_t>(problem.num_vars(), 0), std::numeric_limits<double>::infinity()};
    for_each_assignment(problem.num_vars(), [&](std::uint64_t, std::span<const std::uint8_t> s) {
        const double e = problem.energy(s);
        if (e < best.energy) {
            best.energy = e;
            best.solution.assign(s.begin(), s.end());
        }
    });
    return best;
}

} // namespace bqq::pubo
