#pragma once

// Domain types for patients, rounds and weekly grids, plus cohort file
// ingestion/validation.  Week indices are per patient and start at 0 at the
// patient's first round.  A cohort is immutable after load and safe to share
// read-only across parallel workers.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stepdown {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Weekly grid for one patient: week n covers [n, n+1), Delta = 1 week, and
// intensities are treated as piecewise constant with the left endpoint as
// the representative point.
struct TimeGrid {
    int n_weeks = 0;
};

constexpr int kMinRoundWeeks = 16;
constexpr int kMaxRoundWeeks = 24;
constexpr int kMaxMedLevel = 5;

struct Round {
    int index = 0;       // 1-based round number
    int week_start = 0;  // inclusive
    int week_end = 0;    // exclusive
    int obs_med = 0;     // observed (censored) medication level, 0..5
    long obs_rescue = 0; // rescue inhaler refills aggregated over the round
    long obs_ocs = 0;    // oral steroid fills aggregated over the round

    int n_weeks() const { return week_end - week_start; }
    bool contains(int week) const { return week >= week_start && week < week_end; }
};

// Weekly counts for the three response types.  rescue/ocs are only
// materialized for synthetic cohorts; real data observes them as round
// aggregates.
struct WeeklyOutcomes {
    Eigen::VectorXi ed_ip;
    Eigen::VectorXi rescue;
    Eigen::VectorXi ocs;

    bool has_latent_counts() const { return rescue.size() > 0; }
};

struct Patient {
    std::string id;
    Eigen::VectorXd covariates;      // standardized design row
    std::vector<Round> rounds;
    std::vector<int> visit_weeks;    // sorted, unique; provider-contact weeks
    WeeklyOutcomes weekly;           // ed_ip spans the full grid

    int n_weeks() const { return rounds.empty() ? 0 : rounds.back().week_end; }
    TimeGrid grid() const { return TimeGrid{n_weeks()}; }
    bool is_visit_week(int week) const {
        return std::binary_search(visit_weeks.begin(), visit_weeks.end(), week);
    }
    // Index into rounds for a week, -1 if out of range.
    int round_of_week(int week) const {
        for (std::size_t m = 0; m < rounds.size(); ++m)
            if (rounds[m].contains(week)) return static_cast<int>(m);
        return -1;
    }
};

struct Cohort {
    std::vector<Patient> patients;
    std::vector<std::string> covariate_names;
    Eigen::VectorXd cov_means;       // standardization shift per covariate
    Eigen::VectorXd cov_sds;         // standardization scale per covariate
    Eigen::MatrixXd raw_covariates;  // original values, one row per patient

    int n_patients() const { return static_cast<int>(patients.size()); }
    int n_covariates() const { return static_cast<int>(covariate_names.size()); }
    const Patient* find(const std::string& id) const;
};

struct CohortSchema {
    std::string patients_file = "patients.csv";
    std::string rounds_file = "rounds.csv";
    std::string events_file = "events.csv";
};

struct Violation {
    std::string patient_id;
    std::string rule;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

// Round-5 observations for one held-out patient; the medication level is
// treated as constant over the round when predicting.
struct HoldoutRecord {
    std::string patient_id;
    Round round;
    Eigen::VectorXi ed_ip;  // weekly ED/IP counts over the held-out round
};

struct HoldoutSet {
    std::vector<HoldoutRecord> records;
};

// Loads the three cohort CSV files from `dir`, standardizes covariates and
// validates every invariant.  Throws ParseError on malformed input and
// DataError on invariant violations (message names patient id and rule).
Cohort load_cohort(const std::filesystem::path& dir, const CohortSchema& schema = {});

// Canonical writer; load_cohort(write_cohort(c)) round-trips byte-identically.
void write_cohort(const std::filesystem::path& dir, const Cohort& cohort,
                  const CohortSchema& schema = {});

ValidationReport validate_cohort(const Cohort& cohort);

// Masks the round-5 observations of `n_holdout` randomly selected patients
// (those with 5 rounds).  Deterministic under a fixed seed.
std::pair<Cohort, HoldoutSet> holdout_split(const Cohort& cohort, int n_holdout, uint64_t seed);

}  // namespace stepdown
