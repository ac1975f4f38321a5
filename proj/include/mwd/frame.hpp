#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mwd {

struct FrameError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Phase 1 cohort: named unit-level columns, stratum labels, and the
// phase 2 sampling state (wave index per sampled unit, 0 = unsampled).
class SamplingFrame {
public:
    SamplingFrame() = default;
    explicit SamplingFrame(std::size_t n_units);

    std::size_t n_units() const { return n_; }
    int n_strata() const { return n_strata_; }

    bool has_column(const std::string& name) const;
    void add_column(const std::string& name, std::vector<double> values);
    const std::vector<double>& column(const std::string& name) const;
    std::vector<double>& mutable_column(const std::string& name);
    const std::vector<std::string>& column_names() const { return names_; }

    // 1..K once assigned, 0 before stratification.
    const std::vector<int>& stratum_ids() const { return stratum_id_; }
    void set_stratum_ids(std::vector<int> ids, int n_strata);
    std::vector<long long> stratum_sizes() const;

    const std::vector<int>& sampled_waves() const { return sampled_wave_; }
    bool is_sampled(std::size_t i) const { return sampled_wave_[i] != 0; }
    // Sampling is without replacement: a wave mark is immutable.
    void mark_sampled(std::size_t i, int wave);
    std::vector<std::size_t> sampled_indices() const;
    void clear_sampling();

private:
    std::size_t n_ = 0;
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<double>> data_;
    std::vector<int> stratum_id_;
    std::vector<int> sampled_wave_;
    int n_strata_ = 0;
};

struct StratumSummary {
    int stratum_id = 0;
    long long pop_size = 0;
    long long already_sampled = 0;
    std::vector<double> sd_by_param;  // sigma_{p,k}, one entry per tracked parameter
};

struct StratumVariable {
    std::string column;
    // Binary columns are split on value; continuous columns are split at
    // empirical quantiles (2 bins = median split, 3 = tertiles).
    enum class Kind { Binary, Quantile } kind = Kind::Binary;
    int n_bins = 2;
};

struct StratificationRule {
    std::vector<StratumVariable> variables;
    // Strata smaller than this are merged into an adjacent stratum.
    long long min_stratum_size = 4;
};

// Assigns contiguous stratum labels 1..K; small/empty cells are merged by
// bin adjacency. Re-running with the same rule is idempotent.
void build_strata(SamplingFrame& frame, const StratificationRule& rule);

// Per-stratum sample SDs (denominator n-1) of each influence column.
// `rows` maps influence rows to frame unit indices; empty means the matrix
// has one row per unit. Strata with <2 contributing rows fall back to the
// pooled across-stratum SD.
std::vector<StratumSummary> summarize_strata(const SamplingFrame& frame,
                                             const Eigen::MatrixXd& influence,
                                             const std::vector<std::size_t>& rows = {});

// CSV: header row, one row per unit, '.' decimal separator.
SamplingFrame read_frame_csv(const std::string& path);
void write_frame_csv(const SamplingFrame& frame, const std::string& path,
                     bool include_stratum = true);

}  // namespace mwd
