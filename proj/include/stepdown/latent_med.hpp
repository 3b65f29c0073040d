#pragma once

// Latent controller-medication process: stationary O-U segments joined by a
// jump counting process, truncated below at zero, and the interval-censoring
// map that ties the path to the round-aggregated observed level.

#include <vector>

#include <Eigen/Dense>

#include "stepdown/cohort.hpp"
#include "stepdown/rng.hpp"

namespace stepdown {

// Segment count truncation: proposals reaching H jumps are rejected, which
// keeps the sampler's target exact on the truncated space.
constexpr int kSegmentCap = 10;

struct OuParams {
    double sigma2 = 0.0125;  // stationary variance
    double phi = 0.4054651081081644;  // decay per week; lag-1 corr = exp(-phi)

    double lag1() const { return std::exp(-phi); }
    void validate() const {
        if (!(sigma2 > 0.0)) throw std::invalid_argument("OuParams: sigma2 must be positive");
        if (!(phi > 0.0)) throw std::invalid_argument("OuParams: phi must be positive");
    }
};

// Jump path B = C + D on a weekly grid.  A C jump in week w takes effect at
// the start of week w; a visit-triggered D jump at visit week v takes effect
// at the start of week v+1.
struct JumpPath {
    Eigen::VectorXi c_counts;   // Poisson jumps per week
    std::vector<int> d_weeks;   // visit weeks with a triggered jump (sorted)

    int n_weeks() const { return static_cast<int>(c_counts.size()); }
    int total_jumps() const {
        return c_counts.sum() + static_cast<int>(d_weeks.size());
    }
    bool has_d_jump(int visit_week) const {
        return std::binary_search(d_weeks.begin(), d_weeks.end(), visit_week);
    }
    // B evaluated at every week; nondecreasing, B(0) counts week-0 C jumps.
    Eigen::VectorXi b_path() const;
};

struct MedPath {
    Eigen::VectorXd segment_means;  // mu_h, h = 0..H-1
    Eigen::MatrixXd segments;       // H x N matrix of O-U paths
    Eigen::VectorXd z;              // assembled nonnegative path
};

// Draw from the stationary mean-zero O-U process on the weekly grid via its
// AR(1) decomposition: marginal variance sigma2, lag-k correlation exp(-phi*k).
Eigen::VectorXd sample_ou_path(const TimeGrid& grid, const OuParams& p, RngStream& rng);

// Stationary AR(1) quadratic form Q with unit marginal variance:
// log density = -0.5*N*log(2*pi*sigma2) - 0.5*(N-1)*log(1-r^2) - Q/(2*sigma2).
double ou_quad_form(const Eigen::Ref<const Eigen::VectorXd>& path, double lag1);

// Quadratic-form contribution of the terms touching weeks [a, b] only
// (AR(1) factor terms t in [a, min(b+1, N-1)], plus the marginal term if a==0).
double ou_quad_form_window(const Eigen::Ref<const Eigen::VectorXd>& path, double lag1,
                           int a, int b);

double ou_log_density(const Eigen::Ref<const Eigen::VectorXd>& path, double sigma2, double lag1);

// Redraw path values outside [active_start, active_end) from the O-U
// conditional given the active block (forward/backward AR(1) extensions).
void ou_fill_outside(Eigen::Ref<Eigen::VectorXd> path, int active_start, int active_end,
                     double sigma2, double lag1, RngStream& rng);

// Draw a jump path: weekly-Poisson C jumps with intensity rho per week and
// independent Bernoulli(varpi) D jumps at visit weeks.  Redraws until the
// total stays below the segment cap, i.e. samples the truncated prior.
JumpPath sample_jump_path(const std::vector<int>& visit_weeks, const TimeGrid& grid,
                          double rho, double varpi, RngStream& rng,
                          int segment_cap = kSegmentCap);

// Pointwise assembly z(n) = max(0, mu_h + seg_h(n)) with h = B(n).
MedPath assemble_med_path(const Eigen::VectorXd& segment_means, const Eigen::MatrixXd& segments,
                          const JumpPath& jumps);

// In-place assembly over the window [a, b); b_path must match jumps.
void assemble_z_range(Eigen::Ref<Eigen::VectorXd> z, const Eigen::VectorXd& segment_means,
                      const Eigen::MatrixXd& segments, const Eigen::VectorXi& b_path,
                      int a, int b);

// Interval-censored round aggregate: min(5, floor(round mean of z + 0.5)).
int censor_round_average(const Eigen::Ref<const Eigen::VectorXd>& z, const Round& round);

// The hard constraint the sampler enforces: every round's censored average
// equals the observed level.
bool consistent_with_obs(const Eigen::Ref<const Eigen::VectorXd>& z,
                         const std::vector<Round>& rounds);

}  // namespace stepdown
