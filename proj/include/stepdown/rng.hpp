#pragma once

// Counter-based random number generation (Philox 4x32-10) with explicitly
// addressed substreams.  Every (seed, purpose, a, b, c) tuple names an
// independent stream, so parallel workers can draw without coordination and
// a run is reproducible regardless of scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

namespace stepdown {

namespace detail {

inline void philox_round(std::array<uint32_t, 4>& ctr, std::array<uint32_t, 2>& key) {
    constexpr uint64_t M0 = 0xD2511F53ull;
    constexpr uint64_t M1 = 0xCD9E8D57ull;
    const uint64_t p0 = M0 * ctr[0];
    const uint64_t p1 = M1 * ctr[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += 0x9E3779B9u;
    key[1] += 0xBB67AE85u;
}

inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr,
                                          std::array<uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) philox_round(ctr, key);
    return ctr;
}

}  // namespace detail

// Stream purposes; field widths in the stream id are fixed so distinct
// tuples can never collide.
enum class RngPurpose : uint64_t {
    init = 0,
    patient_sweep = 1,
    globals_sweep = 2,
    simulate = 3,
    predict = 4,
    holdout = 5,
    bootstrap = 6,
    geweke = 7,
    misc = 8,
};

class RngStream {
public:
    RngStream() : RngStream(0, RngPurpose::misc, 0, 0, 0) {}

    // a: chain or replicate (< 2^14), b: patient (< 2^22), c: iteration (< 2^22)
    RngStream(uint64_t seed, RngPurpose purpose, uint64_t a, uint64_t b, uint64_t c) {
        if (a >= (1ull << 14) || b >= (1ull << 22) || c >= (1ull << 22))
            throw std::invalid_argument("RngStream: substream index out of range");
        stream_id_ = (static_cast<uint64_t>(purpose) << 58) | (a << 44) | (b << 22) | c;
        key_ = {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
        block_ = 0;
        pos_ = 4;
        has_spare_normal_ = false;
        spare_normal_ = 0.0;
    }

    uint32_t u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    uint64_t u64() {
        const uint64_t lo = u32();
        const uint64_t hi = u32();
        return (hi << 32) | lo;
    }

    // Uniform on the open interval (0,1).
    double uniform() {
        return (static_cast<double>(u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) {
        // Rejection to kill modulo bias.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do { x = u64(); } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        if (has_spare_normal_) {
            has_spare_normal_ = false;
            return spare_normal_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_normal_ = r * std::sin(a);
        has_spare_normal_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    // Marsaglia-Tsang; shape > 0, scale > 0.
    double gamma(double shape, double scale) {
        if (!(shape > 0.0) || !(scale > 0.0))
            throw std::invalid_argument("gamma: shape and scale must be positive");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    double chisq(double dof) { return gamma(0.5 * dof, 2.0); }

    double beta(double a, double b) {
        const double x = gamma(a, 1.0);
        const double y = gamma(b, 1.0);
        return x / (x + y);
    }

    double inverse_gamma(double shape, double scale) { return scale / gamma(shape, 1.0); }

    // Exact for any mean: large means are split into chunks small enough for
    // the multiplication method (Poisson additivity keeps this exact).
    long poisson(double mean) {
        if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
        long total = 0;
        while (mean > 30.0) {
            total += poisson_small(30.0);
            mean -= 30.0;
        }
        return total + poisson_small(mean);
    }

    // Multivariate normal given a mean and the lower Cholesky factor of the
    // covariance.
    Eigen::VectorXd mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower) {
        Eigen::VectorXd z(mean.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal();
        return mean + chol_lower * z;
    }

    // Wishart(scale V, dof) draw via Bartlett decomposition; returns W with
    // E[W] = dof * V.  chol_v is the lower Cholesky factor of V.
    Eigen::MatrixXd wishart(const Eigen::MatrixXd& chol_v, double dof) {
        const Eigen::Index p = chol_v.rows();
        if (dof < static_cast<double>(p))
            throw std::invalid_argument("wishart: dof below dimension");
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index i = 0; i < p; ++i) {
            a(i, i) = std::sqrt(chisq(dof - static_cast<double>(i)));
            for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal();
        }
        const Eigen::MatrixXd la = chol_v * a;
        return la * la.transpose();
    }

    uint64_t stream_id() const { return stream_id_; }

private:
    void refill() {
        const std::array<uint32_t, 4> ctr = {
            static_cast<uint32_t>(block_), static_cast<uint32_t>(block_ >> 32),
            static_cast<uint32_t>(stream_id_), static_cast<uint32_t>(stream_id_ >> 32)};
        buf_ = detail::philox4x32(ctr, key_);
        ++block_;
        pos_ = 0;
    }

    long poisson_small(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        long k = 0;
        double prod = uniform();
        while (prod > limit) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

    uint64_t stream_id_;
    std::array<uint32_t, 2> key_;
    uint64_t block_;
    std::array<uint32_t, 4> buf_{};
    int pos_;
    bool has_spare_normal_;
    double spare_normal_;
};

}  // namespace stepdown
