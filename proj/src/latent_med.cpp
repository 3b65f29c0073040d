#include "stepdown/latent_med.hpp"

#include <cmath>

namespace stepdown {

Eigen::VectorXi JumpPath::b_path() const {
    Eigen::VectorXi b(n_weeks());
    int level = 0;
    std::size_t di = 0;
    for (int w = 0; w < n_weeks(); ++w) {
        level += c_counts(w);
        // D jumps at week w-1 take effect at w.
        while (di < d_weeks.size() && d_weeks[di] + 1 <= w) {
            ++level;
            ++di;
        }
        b(w) = level;
    }
    return b;
}

Eigen::VectorXd sample_ou_path(const TimeGrid& grid, const OuParams& p, RngStream& rng) {
    p.validate();
    if (grid.n_weeks <= 0) throw std::invalid_argument("sample_ou_path: empty grid");
    const double r = p.lag1();
    const double sd = std::sqrt(p.sigma2);
    const double innov_sd = sd * std::sqrt(1.0 - r * r);
    Eigen::VectorXd x(grid.n_weeks);
    x(0) = sd * rng.normal();
    for (int t = 1; t < grid.n_weeks; ++t) x(t) = r * x(t - 1) + innov_sd * rng.normal();
    return x;
}

double ou_quad_form(const Eigen::Ref<const Eigen::VectorXd>& path, double lag1) {
    const int n = static_cast<int>(path.size());
    if (n == 0) return 0.0;
    const double denom = 1.0 - lag1 * lag1;
    double q = path(0) * path(0);
    for (int t = 1; t < n; ++t) {
        const double e = path(t) - lag1 * path(t - 1);
        q += e * e / denom;
    }
    return q;
}

double ou_quad_form_window(const Eigen::Ref<const Eigen::VectorXd>& path, double lag1,
                           int a, int b) {
    const int n = static_cast<int>(path.size());
    const double denom = 1.0 - lag1 * lag1;
    double q = 0.0;
    if (a == 0 && n > 0) q += path(0) * path(0);
    const int lo = std::max(1, a);
    const int hi = std::min(n - 1, b + 1);
    for (int t = lo; t <= hi; ++t) {
        const double e = path(t) - lag1 * path(t - 1);
        q += e * e / denom;
    }
    return q;
}

double ou_log_density(const Eigen::Ref<const Eigen::VectorXd>& path, double sigma2,
                      double lag1) {
    const int n = static_cast<int>(path.size());
    if (n == 0) return 0.0;
    constexpr double log2pi = 1.8378770664093454835606594728112;
    return -0.5 * n * (log2pi + std::log(sigma2)) -
           0.5 * (n - 1) * std::log(1.0 - lag1 * lag1) -
           ou_quad_form(path, lag1) / (2.0 * sigma2);
}

void ou_fill_outside(Eigen::Ref<Eigen::VectorXd> path, int active_start, int active_end,
                     double sigma2, double lag1, RngStream& rng) {
    const int n = static_cast<int>(path.size());
    const double innov_sd = std::sqrt(sigma2 * (1.0 - lag1 * lag1));
    // The stationary O-U process is time-reversible, so the left extension is
    // a backward AR(1) from the first active point.
    for (int t = active_start - 1; t >= 0; --t)
        path(t) = lag1 * path(t + 1) + innov_sd * rng.normal();
    for (int t = active_end; t < n; ++t)
        path(t) = lag1 * path(t - 1) + innov_sd * rng.normal();
}

JumpPath sample_jump_path(const std::vector<int>& visit_weeks, const TimeGrid& grid,
                          double rho, double varpi, RngStream& rng, int segment_cap) {
    if (rho < 0.0) throw std::invalid_argument("sample_jump_path: rho must be nonnegative");
    if (varpi < 0.0 || varpi > 1.0)
        throw std::invalid_argument("sample_jump_path: varpi must lie in [0,1]");
    for (;;) {
        JumpPath jp;
        jp.c_counts = Eigen::VectorXi::Zero(grid.n_weeks);
        for (int w = 0; w < grid.n_weeks; ++w)
            jp.c_counts(w) = static_cast<int>(rng.poisson(rho));
        for (int v : visit_weeks)
            if (rng.bernoulli(varpi)) jp.d_weeks.push_back(v);
        if (jp.total_jumps() <= segment_cap - 1) return jp;
    }
}

MedPath assemble_med_path(const Eigen::VectorXd& segment_means, const Eigen::MatrixXd& segments,
                          const JumpPath& jumps) {
    const Eigen::VectorXi b = jumps.b_path();
    const int n = jumps.n_weeks();
    if (segments.cols() != n)
        throw std::invalid_argument("assemble_med_path: segment grid mismatch");
    if (n > 0 && (segment_means.size() <= b(n - 1) || segments.rows() <= b(n - 1)))
        throw std::invalid_argument("assemble_med_path: not enough segments for max jump count");
    MedPath mp;
    mp.segment_means = segment_means;
    mp.segments = segments;
    mp.z.resize(n);
    assemble_z_range(mp.z, segment_means, segments, b, 0, n);
    return mp;
}

void assemble_z_range(Eigen::Ref<Eigen::VectorXd> z, const Eigen::VectorXd& segment_means,
                      const Eigen::MatrixXd& segments, const Eigen::VectorXi& b_path,
                      int a, int b) {
    for (int t = a; t < b; ++t) {
        const int h = b_path(t);
        z(t) = std::max(0.0, segment_means(h) + segments(h, t));
    }
}

int censor_round_average(const Eigen::Ref<const Eigen::VectorXd>& z, const Round& round) {
    const double mean = z.segment(round.week_start, round.n_weeks()).mean();
    const int level = static_cast<int>(std::floor(mean + 0.5));
    return std::min(kMaxMedLevel, level);
}

bool consistent_with_obs(const Eigen::Ref<const Eigen::VectorXd>& z,
                         const std::vector<Round>& rounds) {
    for (const Round& r : rounds)
        if (censor_round_average(z, r) != r.obs_med) return false;
    return true;
}

}  // namespace stepdown
