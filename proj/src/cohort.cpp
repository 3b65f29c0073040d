#include "stepdown/cohort.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "stepdown/io_util.hpp"
#include "stepdown/rng.hpp"

namespace stepdown {

const Patient* Cohort::find(const std::string& id) const {
    for (const auto& p : patients)
        if (p.id == id) return &p;
    return nullptr;
}

std::string ValidationReport::to_string() const {
    std::ostringstream out;
    for (const auto& v : violations)
        out << v.patient_id << ": [" << v.rule << "] " << v.message << "\n";
    return out.str();
}

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;
};

CsvTable read_csv(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (lineno == 1) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size())
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": expected " + std::to_string(table.header.size()) +
                             " fields, got " + std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(lineno);
    }
    if (table.header.empty()) throw ParseError(path.string() + ": missing header row");
    return table;
}

[[noreturn]] void invariant_error(const std::string& id, const std::string& rule,
                                  const std::string& message) {
    throw DataError("patient " + id + ": [" + rule + "] " + message);
}

}  // namespace

Cohort load_cohort(const std::filesystem::path& dir, const CohortSchema& schema) {
    const auto patients_path = dir / schema.patients_file;
    const auto rounds_path = dir / schema.rounds_file;
    const auto events_path = dir / schema.events_file;

    const CsvTable pt = read_csv(patients_path);
    if (pt.header.empty() || pt.header[0] != "id")
        throw ParseError(patients_path.string() + ": first column must be 'id'");

    Cohort cohort;
    cohort.covariate_names.assign(pt.header.begin() + 1, pt.header.end());
    const int J = cohort.n_covariates();
    const int n = static_cast<int>(pt.rows.size());
    cohort.raw_covariates.resize(n, J);

    std::map<std::string, int> index_of;
    for (int i = 0; i < n; ++i) {
        const auto& row = pt.rows[i];
        Patient p;
        p.id = row[0];
        if (p.id.empty())
            throw ParseError(patients_path.string() + ":" + std::to_string(pt.line_numbers[i]) +
                             ": empty patient id");
        if (index_of.count(p.id)) invariant_error(p.id, "unique id", "duplicate patient id");
        index_of[p.id] = i;
        for (int j = 0; j < J; ++j)
            cohort.raw_covariates(i, j) =
                parse_double(row[j + 1], patients_path.string() + ":" +
                                             std::to_string(pt.line_numbers[i]));
        cohort.patients.push_back(std::move(p));
    }

    // Standardize covariates over the cohort; the shift/scale are retained
    // for reporting.  Constant columns cannot be standardized.
    cohort.cov_means = Eigen::VectorXd::Zero(J);
    cohort.cov_sds = Eigen::VectorXd::Ones(J);
    if (n > 1) {
        for (int j = 0; j < J; ++j) {
            const double mean = cohort.raw_covariates.col(j).mean();
            const double ss = (cohort.raw_covariates.col(j).array() - mean).square().sum();
            const double sd = std::sqrt(ss / (n - 1));
            if (sd == 0.0)
                invariant_error(cohort.patients[0].id, "constant covariate",
                                "covariate '" + cohort.covariate_names[j] +
                                    "' is constant over the cohort");
            cohort.cov_means(j) = mean;
            cohort.cov_sds(j) = sd;
        }
    }
    for (int i = 0; i < n; ++i)
        cohort.patients[i].covariates =
            ((cohort.raw_covariates.row(i).transpose() - cohort.cov_means).array() /
             cohort.cov_sds.array())
                .matrix();

    // rounds.csv
    const CsvTable rt = read_csv(rounds_path);
    const std::vector<std::string> want_rounds = {"id",      "round",      "week_start",
                                                  "week_end", "obs_med",   "obs_rescue",
                                                  "obs_ocs"};
    if (rt.header != want_rounds)
        throw ParseError(rounds_path.string() +
                         ": header must be id,round,week_start,week_end,obs_med,obs_rescue,obs_ocs");
    for (std::size_t r = 0; r < rt.rows.size(); ++r) {
        const auto& row = rt.rows[r];
        const std::string ctx = rounds_path.string() + ":" + std::to_string(rt.line_numbers[r]);
        const auto it = index_of.find(row[0]);
        if (it == index_of.end())
            throw ParseError(ctx + ": unknown patient id '" + row[0] + "'");
        Round rd;
        rd.index = static_cast<int>(parse_long(row[1], ctx));
        rd.week_start = static_cast<int>(parse_long(row[2], ctx));
        rd.week_end = static_cast<int>(parse_long(row[3], ctx));
        rd.obs_med = static_cast<int>(parse_long(row[4], ctx));
        rd.obs_rescue = parse_long(row[5], ctx);
        rd.obs_ocs = parse_long(row[6], ctx);
        cohort.patients[it->second].rounds.push_back(rd);
    }
    for (auto& p : cohort.patients)
        std::sort(p.rounds.begin(), p.rounds.end(),
                  [](const Round& a, const Round& b) { return a.index < b.index; });

    // events.csv — weekly ED/IP counts and provider-contact flags.
    const CsvTable et = read_csv(events_path);
    const std::vector<std::string> want_events = {"id", "week", "ed_ip", "visit_flag"};
    if (et.header != want_events)
        throw ParseError(events_path.string() + ": header must be id,week,ed_ip,visit_flag");
    for (auto& p : cohort.patients) {
        p.weekly.ed_ip = Eigen::VectorXi::Zero(p.n_weeks());
    }
    for (std::size_t r = 0; r < et.rows.size(); ++r) {
        const auto& row = et.rows[r];
        const std::string ctx = events_path.string() + ":" + std::to_string(et.line_numbers[r]);
        const auto it = index_of.find(row[0]);
        if (it == index_of.end())
            throw ParseError(ctx + ": unknown patient id '" + row[0] + "'");
        Patient& p = cohort.patients[it->second];
        const int week = static_cast<int>(parse_long(row[1], ctx));
        const long ed = parse_long(row[2], ctx);
        const long visit = parse_long(row[3], ctx);
        if (week < 0 || week >= p.n_weeks())
            invariant_error(p.id, "event week range",
                            "week " + std::to_string(week) + " outside the observed range");
        if (ed < 0) invariant_error(p.id, "event count", "negative ED/IP count");
        p.weekly.ed_ip(week) = static_cast<int>(ed);
        if (visit != 0) p.visit_weeks.push_back(week);
    }
    for (auto& p : cohort.patients) {
        std::sort(p.visit_weeks.begin(), p.visit_weeks.end());
        p.visit_weeks.erase(std::unique(p.visit_weeks.begin(), p.visit_weeks.end()),
                            p.visit_weeks.end());
    }

    const ValidationReport report = validate_cohort(cohort);
    if (!report.ok()) {
        const auto& v = report.violations.front();
        invariant_error(v.patient_id, v.rule, v.message);
    }
    return cohort;
}

ValidationReport validate_cohort(const Cohort& cohort) {
    ValidationReport report;
    auto flag = [&](const std::string& id, const std::string& rule, const std::string& msg) {
        report.violations.push_back({id, rule, msg});
    };

    for (int i = 0; i < cohort.n_patients(); ++i) {
        const Patient& p = cohort.patients[i];
        if (p.covariates.size() != cohort.n_covariates())
            flag(p.id, "covariate length", "covariate vector length mismatch");
        if (p.rounds.empty()) {
            flag(p.id, "rounds present", "patient has no rounds");
            continue;
        }
        if (p.rounds.front().week_start != 0)
            flag(p.id, "rounds contiguous", "first round must start at week 0");
        for (std::size_t m = 0; m < p.rounds.size(); ++m) {
            const Round& r = p.rounds[m];
            const std::string rd = "round " + std::to_string(r.index);
            if (r.index != static_cast<int>(m) + 1)
                flag(p.id, "round index", rd + ": indices must be consecutive from 1");
            if (m + 1 < p.rounds.size()) {
                const Round& next = p.rounds[m + 1];
                if (next.week_start < r.week_end)
                    flag(p.id, "rounds overlap", rd + " overlaps the next round");
                else if (next.week_start > r.week_end)
                    flag(p.id, "rounds contiguous", rd + " leaves a gap before the next round");
            }
            if (r.obs_med < 0 || r.obs_med > kMaxMedLevel)
                flag(p.id, "obs_med range",
                     rd + ": obs_med " + std::to_string(r.obs_med) + " outside 0..5");
            const int len = r.n_weeks();
            if (len < kMinRoundWeeks || len > kMaxRoundWeeks)
                flag(p.id, "round span",
                     rd + ": " + std::to_string(len) + " weeks outside 16..24");
            if (r.obs_rescue < 0)
                flag(p.id, "refill count", rd + ": negative rescue refill count");
            if (r.obs_ocs < 0)
                flag(p.id, "refill count", rd + ": negative OCS fill count");
        }
        for (int w : p.visit_weeks)
            if (w < 0 || w >= p.n_weeks()) {
                flag(p.id, "visit week range", "visit week outside the observed range");
                break;
            }
        if (p.weekly.ed_ip.size() != p.n_weeks())
            flag(p.id, "weekly grid", "weekly ED/IP vector does not span the grid");
        if (p.weekly.has_latent_counts()) {
            // When weekly rescue/OCS counts are materialized they must
            // reassemble the round aggregates exactly.
            for (const Round& r : p.rounds) {
                long sum2 = 0, sum3 = 0;
                for (int w = r.week_start; w < r.week_end; ++w) {
                    sum2 += p.weekly.rescue(w);
                    sum3 += p.weekly.ocs(w);
                }
                if (sum2 != r.obs_rescue)
                    flag(p.id, "round reassembly",
                         "weekly rescue counts do not sum to the round aggregate");
                if (sum3 != r.obs_ocs)
                    flag(p.id, "round reassembly",
                         "weekly OCS counts do not sum to the round aggregate");
            }
        }
    }
    return report;
}

void write_cohort(const std::filesystem::path& dir, const Cohort& cohort,
                  const CohortSchema& schema) {
    std::filesystem::create_directories(dir);

    std::string pf = "id";
    for (const auto& name : cohort.covariate_names) pf += "," + name;
    pf += "\n";
    for (int i = 0; i < cohort.n_patients(); ++i) {
        pf += cohort.patients[i].id;
        for (int j = 0; j < cohort.n_covariates(); ++j)
            pf += "," + fmt_double(cohort.raw_covariates(i, j));
        pf += "\n";
    }
    write_text_file_atomic(dir / schema.patients_file, pf);

    std::string rf = "id,round,week_start,week_end,obs_med,obs_rescue,obs_ocs\n";
    for (const auto& p : cohort.patients)
        for (const auto& r : p.rounds)
            rf += p.id + "," + std::to_string(r.index) + "," + std::to_string(r.week_start) +
                  "," + std::to_string(r.week_end) + "," + std::to_string(r.obs_med) + "," +
                  std::to_string(r.obs_rescue) + "," + std::to_string(r.obs_ocs) + "\n";
    write_text_file_atomic(dir / schema.rounds_file, rf);

    std::string ef = "id,week,ed_ip,visit_flag\n";
    for (const auto& p : cohort.patients)
        for (int w = 0; w < p.n_weeks(); ++w)
            ef += p.id + "," + std::to_string(w) + "," + std::to_string(p.weekly.ed_ip(w)) +
                  "," + (p.is_visit_week(w) ? "1" : "0") + "\n";
    write_text_file_atomic(dir / schema.events_file, ef);
}

std::pair<Cohort, HoldoutSet> holdout_split(const Cohort& cohort, int n_holdout, uint64_t seed) {
    std::vector<int> eligible;
    for (int i = 0; i < cohort.n_patients(); ++i)
        if (cohort.patients[i].rounds.size() == 5) eligible.push_back(i);
    if (n_holdout < 0 || n_holdout > static_cast<int>(eligible.size()))
        throw DataError("holdout_split: n_holdout " + std::to_string(n_holdout) +
                        " exceeds the " + std::to_string(eligible.size()) +
                        " eligible patients");

    // Partial Fisher-Yates over the eligible list.
    RngStream rng(seed, RngPurpose::holdout, 0, 0, 0);
    for (int k = 0; k < n_holdout; ++k) {
        const int j = k + static_cast<int>(rng.uniform_int(eligible.size() - k));
        std::swap(eligible[k], eligible[j]);
    }
    std::vector<int> selected(eligible.begin(), eligible.begin() + n_holdout);
    std::sort(selected.begin(), selected.end());

    Cohort train = cohort;
    HoldoutSet test;
    for (int idx : selected) {
        Patient& p = train.patients[idx];
        HoldoutRecord rec;
        rec.patient_id = p.id;
        rec.round = p.rounds.back();
        rec.ed_ip = p.weekly.ed_ip.segment(rec.round.week_start, rec.round.n_weeks());
        test.records.push_back(std::move(rec));

        p.rounds.pop_back();
        const int weeks = p.n_weeks();
        p.weekly.ed_ip.conservativeResize(weeks);
        if (p.weekly.has_latent_counts()) {
            p.weekly.rescue.conservativeResize(weeks);
            p.weekly.ocs.conservativeResize(weeks);
        }
        p.visit_weeks.erase(
            std::remove_if(p.visit_weeks.begin(), p.visit_weeks.end(),
                           [weeks](int w) { return w >= weeks; }),
            p.visit_weeks.end());
    }
    return {std::move(train), std::move(test)};
}

}  // namespace stepdown
