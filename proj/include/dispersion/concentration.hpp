#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace dispersion {

// mu = C / (1 - rho), the uniform bound on E[Y] under the tail hypothesis.
inline double tail_mean_bound(double C, double rho) {
    if (C <= 0) throw std::invalid_argument("tail bound: C must be positive");
    if (rho <= 0 || rho >= 1) throw std::invalid_argument("tail bound: rho must be in (0,1)");
    return C / (1.0 - rho);
}

// A finite integer distribution on {0..K} whose survival function is
// dominated by C * rho^k. Construction verifies both the normalization and
// the domination condition at every k.
class TailSpec {
public:
    TailSpec(double C, double rho, std::vector<double> pmf)
        : C_(C), rho_(rho), pmf_(std::move(pmf)) {
        if (C_ <= 0 || rho_ <= 0 || rho_ >= 1)
            throw std::invalid_argument("TailSpec: need C > 0 and rho in (0,1)");
        if (pmf_.empty()) throw std::invalid_argument("TailSpec: empty pmf");
        double total = 0;
        for (double p : pmf_) {
            if (p < 0) throw std::invalid_argument("TailSpec: negative mass");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("TailSpec: pmf must sum to 1 within 1e-12");
        // survival check: Pr(Y >= k) <= C rho^k for every k in [1, K]
        double survival = 0;
        for (std::size_t k = pmf_.size(); k-- > 1;) {
            survival += pmf_[k];
            if (survival > C_ * std::pow(rho_, static_cast<double>(k)) + 1e-12)
                throw std::invalid_argument("TailSpec: survival exceeds C*rho^k");
        }
    }

    // The extremal distribution with survival exactly min(1, C rho^k),
    // truncated where the discarded tail drops below 1e-15 and renormalized.
    // The constructor re-verifies that truncation kept the domination.
    static TailSpec geometric_dominated(double C, double rho) {
        if (C <= 0 || rho <= 0 || rho >= 1)
            throw std::invalid_argument("TailSpec: need C > 0 and rho in (0,1)");
        std::int64_t K = 1;
        while (C * std::pow(rho, static_cast<double>(K + 1)) >= 1e-15) ++K;
        auto surv = [&](std::int64_t k) {
            return k <= 0 ? 1.0 : std::min(1.0, C * std::pow(rho, static_cast<double>(k)));
        };
        std::vector<double> pmf(K + 1);
        for (std::int64_t k = 0; k <= K; ++k)
            pmf[k] = surv(k) - (k == K ? 0.0 : surv(k + 1));
        double total = 0;
        for (double p : pmf) total += p;
        for (double& p : pmf) p /= total;
        return TailSpec(C, rho, std::move(pmf));
    }

    double C() const noexcept { return C_; }
    double rho() const noexcept { return rho_; }
    const std::vector<double>& pmf() const noexcept { return pmf_; }
    std::int64_t support_max() const noexcept {
        return static_cast<std::int64_t>(pmf_.size()) - 1;
    }

    double mean() const noexcept {
        double m = 0;
        for (std::size_t k = 0; k < pmf_.size(); ++k) m += static_cast<double>(k) * pmf_[k];
        return m;
    }

    double variance() const noexcept {
        const double m = mean();
        double v = 0;
        for (std::size_t k = 0; k < pmf_.size(); ++k)
            v += (static_cast<double>(k) - m) * (static_cast<double>(k) - m) * pmf_[k];
        return v;
    }

private:
    double C_;
    double rho_;
    std::vector<double> pmf_;
};

// Parameters produced by the proof's selection rule: eta found by halving
// from (1-rho)/2 until exp(lambda) <= (1-eta)/rho with lambda = eps*eta^3/(2C);
// the resulting exponent constant is B = eta^3/4.
struct LemmaParams {
    double C = 0;
    double rho = 0;
    double eps = 0;
    double mu = 0;
    double eta = 0;
    double lambda = 0;
    double B = 0;

    // exp(-B eps^2 m)
    double bound(std::int64_t m) const {
        return std::exp(-B * eps * eps * static_cast<double>(m));
    }
};

inline LemmaParams choose_params(double C, double rho, double eps) {
    if (eps < 0 || eps > 1)
        throw std::invalid_argument("choose_params: eps must be in [0,1]");
    LemmaParams p;
    p.C = C;
    p.rho = rho;
    p.eps = eps;
    p.mu = tail_mean_bound(C, rho);
    double eta = (1.0 - rho) / 2.0;
    for (int i = 0; i < 64; ++i) {
        const double lambda = eps * eta * eta * eta / (2.0 * C);
        if (std::exp(lambda) <= (1.0 - eta) / rho) {
            p.eta = eta;
            p.lambda = lambda;
            p.B = eta * eta * eta / 4.0;
            return p;
        }
        eta /= 2.0;
    }
    throw std::runtime_error("choose_params: no feasible eta found"); // unreachable for rho < 1
}

// Slack of the two moment-generating-function inequalities used in the
// proof, evaluated exactly as finite sums over the pmf with Z = Y/mu.
// Both slacks must come out non-negative.
struct MgfSlacks {
    double second_moment_value = 0; // E[Z^2 e^(lambda Z)]
    double second_moment_bound = 0; // 2C / (1 - rho e^lambda)^3
    double mgf_value = 0;           // E[e^(lambda Z)]
    double mgf_bound = 0;           // 1 + lambda + 2 lambda^2 C / (1 - rho e^lambda)^3
    double second_moment_slack = 0;
    double mgf_slack = 0;
};

inline MgfSlacks mgf_chain_check(const TailSpec& spec, double lambda) {
    const double growth = spec.rho() * std::exp(lambda);
    if (growth >= 1)
        throw std::invalid_argument("mgf_chain_check: need rho * e^lambda < 1");
    const double mu = tail_mean_bound(spec.C(), spec.rho());
    MgfSlacks s;
    for (std::size_t k = 0; k < spec.pmf().size(); ++k) {
        const double z = static_cast<double>(k) / mu;
        const double w = std::exp(lambda * z) * spec.pmf()[k];
        s.mgf_value += w;
        s.second_moment_value += z * z * w;
    }
    const double denom = 1.0 - growth;
    s.second_moment_bound = 2.0 * spec.C() / (denom * denom * denom);
    s.mgf_bound = 1.0 + lambda + lambda * lambda * s.second_moment_bound;
    s.second_moment_slack = s.second_moment_bound - s.second_moment_value;
    s.mgf_slack = s.mgf_bound - s.mgf_value;
    return s;
}

// Exact pmf of Y_1 + ... + Y_m for m iid copies, by iterated dense
// convolution. Support grows to m * K, kept below 1e6 points.
inline std::vector<double> convolve_power(const TailSpec& spec, std::int64_t m) {
    if (m < 1) throw std::invalid_argument("convolve_power: m must be >= 1");
    const std::int64_t K = spec.support_max();
    if (m * K > 1'000'000)
        throw std::invalid_argument("convolve_power: support too large for dense convolution");
    std::vector<double> acc = spec.pmf();
    std::vector<double> next;
    for (std::int64_t r = 1; r < m; ++r) {
        next.assign(acc.size() + spec.pmf().size() - 1, 0.0);
        for (std::size_t i = 0; i < acc.size(); ++i) {
            if (acc[i] == 0) continue;
            for (std::size_t k = 0; k < spec.pmf().size(); ++k)
                next[i + k] += acc[i] * spec.pmf()[k];
        }
        acc.swap(next);
    }
    return acc;
}

// Exact Pr(Y_1 + ... + Y_m >= threshold); the tail is summed smallest terms
// first for numerical stability.
inline double exact_tail(const TailSpec& spec, std::int64_t m, std::int64_t threshold) {
    if (threshold <= 0) return 1.0;
    const std::vector<double> conv = convolve_power(spec, m);
    if (threshold >= static_cast<std::int64_t>(conv.size())) return 0.0;
    double tail = 0;
    for (std::size_t k = conv.size(); k-- > static_cast<std::size_t>(threshold);)
        tail += conv[k];
    return tail;
}

} // namespace dispersion
