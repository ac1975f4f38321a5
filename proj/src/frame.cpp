#include "mwd/frame.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mwd/kernels.hpp"

namespace mwd {

SamplingFrame::SamplingFrame(std::size_t n_units)
    : n_(n_units), stratum_id_(n_units, 0), sampled_wave_(n_units, 0) {}

bool SamplingFrame::has_column(const std::string& name) const {
    return index_.count(name) != 0;
}

void SamplingFrame::add_column(const std::string& name, std::vector<double> values) {
    if (values.size() != n_)
        throw FrameError("column '" + name + "' has length " + std::to_string(values.size()) +
                         ", expected " + std::to_string(n_));
    auto it = index_.find(name);
    if (it != index_.end()) {
        data_[it->second] = std::move(values);
        return;
    }
    index_[name] = data_.size();
    names_.push_back(name);
    data_.push_back(std::move(values));
}

const std::vector<double>& SamplingFrame::column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw FrameError("missing column '" + name + "'");
    return data_[it->second];
}

std::vector<double>& SamplingFrame::mutable_column(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw FrameError("missing column '" + name + "'");
    return data_[it->second];
}

void SamplingFrame::set_stratum_ids(std::vector<int> ids, int n_strata) {
    if (ids.size() != n_) throw FrameError("stratum id vector has wrong length");
    for (int id : ids)
        if (id < 1 || id > n_strata) throw FrameError("stratum id out of range");
    stratum_id_ = std::move(ids);
    n_strata_ = n_strata;
}

std::vector<long long> SamplingFrame::stratum_sizes() const {
    std::vector<long long> sizes(static_cast<std::size_t>(n_strata_), 0);
    for (int id : stratum_id_) {
        if (id < 1) throw FrameError("frame is not stratified");
        ++sizes[static_cast<std::size_t>(id - 1)];
    }
    return sizes;
}

void SamplingFrame::mark_sampled(std::size_t i, int wave) {
    if (i >= n_) throw FrameError("unit index out of range");
    if (wave < 1) throw FrameError("wave index must be >= 1");
    if (sampled_wave_[i] != 0) throw FrameError("unit already sampled; waves are without replacement");
    sampled_wave_[i] = wave;
}

std::vector<std::size_t> SamplingFrame::sampled_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_; ++i)
        if (sampled_wave_[i] != 0) out.push_back(i);
    return out;
}

void SamplingFrame::clear_sampling() { std::fill(sampled_wave_.begin(), sampled_wave_.end(), 0); }

namespace {

// Bin index of one unit for one stratification variable.
std::vector<int> bin_column(const std::vector<double>& col, const StratumVariable& var) {
    std::vector<int> bins(col.size(), 0);
    if (var.kind == StratumVariable::Kind::Binary) {
        for (std::size_t i = 0; i < col.size(); ++i) bins[i] = col[i] != 0.0 ? 1 : 0;
        return bins;
    }
    if (var.n_bins < 2) throw FrameError("quantile stratification needs >= 2 bins");
    std::vector<double> sorted(col);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cuts;
    for (int j = 1; j < var.n_bins; ++j) {
        std::size_t idx = static_cast<std::size_t>(
            std::min<double>(sorted.size() - 1.0,
                             std::floor(static_cast<double>(j) * sorted.size() / var.n_bins)));
        cuts.push_back(sorted[idx]);
    }
    for (std::size_t i = 0; i < col.size(); ++i) {
        int b = 0;
        for (double c : cuts)
            if (col[i] > c) ++b;
        bins[i] = b;
    }
    return bins;
}

struct CellGroup {
    std::vector<int> anchor;  // multi-index of the dominant original cell
    long long size = 0;
    int label = 0;  // original cell code, used for deterministic ordering
};

long long l1_distance(const std::vector<int>& a, const std::vector<int>& b) {
    long long d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::llabs(a[i] - b[i]);
    return d;
}

}  // namespace

void build_strata(SamplingFrame& frame, const StratificationRule& rule) {
    if (rule.variables.empty()) throw FrameError("stratification rule has no variables");
    const std::size_t n = frame.n_units();
    std::vector<std::vector<int>> bins;
    std::vector<int> radix;
    for (const auto& var : rule.variables) {
        bins.push_back(bin_column(frame.column(var.column), var));
        radix.push_back(var.kind == StratumVariable::Kind::Binary ? 2 : var.n_bins);
    }

    // Mixed-radix cell code per unit.
    std::vector<int> code(n, 0);
    int n_cells = 1;
    for (std::size_t v = 0; v < bins.size(); ++v) {
        for (std::size_t i = 0; i < n; ++i) code[i] = code[i] * radix[v] + bins[v][i];
        n_cells *= radix[v];
    }

    std::vector<long long> cell_size(static_cast<std::size_t>(n_cells), 0);
    for (int c : code) ++cell_size[static_cast<std::size_t>(c)];

    // One group per nonempty cell; empty cells never emit a stratum.
    std::vector<int> cell_group(static_cast<std::size_t>(n_cells), -1);
    std::vector<CellGroup> groups;
    for (int c = 0; c < n_cells; ++c) {
        if (cell_size[static_cast<std::size_t>(c)] == 0) continue;
        CellGroup g;
        g.size = cell_size[static_cast<std::size_t>(c)];
        g.label = c;
        int rem = c;
        g.anchor.resize(radix.size());
        for (std::size_t v = radix.size(); v-- > 0;) {
            g.anchor[v] = rem % radix[v];
            rem /= radix[v];
        }
        cell_group[static_cast<std::size_t>(c)] = static_cast<int>(groups.size());
        groups.push_back(std::move(g));
    }
    if (groups.empty()) throw FrameError("stratification produced no strata");

    // Merge undersized groups into the nearest group by bin adjacency.
    std::vector<int> redirect(groups.size());
    std::iota(redirect.begin(), redirect.end(), 0);
    auto resolve = [&](int g) {
        while (redirect[static_cast<std::size_t>(g)] != g) g = redirect[static_cast<std::size_t>(g)];
        return g;
    };
    while (true) {
        int smallest = -1;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (resolve(static_cast<int>(g)) != static_cast<int>(g)) continue;
            if (groups[g].size >= rule.min_stratum_size) continue;
            if (smallest < 0 || groups[g].size < groups[static_cast<std::size_t>(smallest)].size ||
                (groups[g].size == groups[static_cast<std::size_t>(smallest)].size &&
                 groups[g].label < groups[static_cast<std::size_t>(smallest)].label))
                smallest = static_cast<int>(g);
        }
        if (smallest < 0) break;
        int best = -1;
        long long best_dist = std::numeric_limits<long long>::max();
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (resolve(static_cast<int>(g)) != static_cast<int>(g) ||
                static_cast<int>(g) == smallest)
                continue;
            long long d = l1_distance(groups[g].anchor, groups[static_cast<std::size_t>(smallest)].anchor);
            if (d < best_dist ||
                (d == best_dist &&
                 (best < 0 || groups[g].size > groups[static_cast<std::size_t>(best)].size ||
                  (groups[g].size == groups[static_cast<std::size_t>(best)].size &&
                   groups[g].label < groups[static_cast<std::size_t>(best)].label))))
                best = static_cast<int>(g), best_dist = d;
        }
        if (best < 0) break;  // single stratum left
        groups[static_cast<std::size_t>(best)].size += groups[static_cast<std::size_t>(smallest)].size;
        redirect[static_cast<std::size_t>(smallest)] = best;
    }

    // Contiguous labels 1..K in original cell-code order.
    std::vector<int> final_label(groups.size(), 0);
    int k = 0;
    for (std::size_t g = 0; g < groups.size(); ++g)
        if (resolve(static_cast<int>(g)) == static_cast<int>(g)) final_label[g] = ++k;
    for (std::size_t g = 0; g < groups.size(); ++g)
        final_label[g] = final_label[static_cast<std::size_t>(resolve(static_cast<int>(g)))];

    std::vector<int> ids(n);
    for (std::size_t i = 0; i < n; ++i)
        ids[i] = final_label[static_cast<std::size_t>(cell_group[static_cast<std::size_t>(code[i])])];
    frame.set_stratum_ids(std::move(ids), k);
}

std::vector<StratumSummary> summarize_strata(const SamplingFrame& frame,
                                             const Eigen::MatrixXd& influence,
                                             const std::vector<std::size_t>& rows) {
    const int K = frame.n_strata();
    if (K < 1) throw FrameError("frame is not stratified");
    const auto P = influence.cols();
    const std::size_t n_rows = static_cast<std::size_t>(influence.rows());
    if (rows.empty() && n_rows != frame.n_units())
        throw FrameError("influence matrix must have one row per unit (or pass a row index map)");
    if (!rows.empty() && rows.size() != n_rows)
        throw FrameError("row index map length mismatch");

    auto unit_of = [&](std::size_t r) { return rows.empty() ? r : rows[r]; };
    const auto& strat = frame.stratum_ids();
    auto sizes = frame.stratum_sizes();

    std::vector<std::vector<std::vector<double>>> by_stratum(
        static_cast<std::size_t>(K), std::vector<std::vector<double>>(static_cast<std::size_t>(P)));
    for (std::size_t r = 0; r < n_rows; ++r) {
        int kk = strat[unit_of(r)] - 1;
        for (Eigen::Index p = 0; p < P; ++p)
            by_stratum[static_cast<std::size_t>(kk)][static_cast<std::size_t>(p)].push_back(
                influence(static_cast<Eigen::Index>(r), p));
    }

    // Pooled fallback SD per parameter, over all contributing rows.
    std::vector<double> pooled(static_cast<std::size_t>(P), 0.0);
    if (n_rows >= 2) {
        for (Eigen::Index p = 0; p < P; ++p) {
            std::vector<double> col(n_rows);
            for (std::size_t r = 0; r < n_rows; ++r) col[r] = influence(static_cast<Eigen::Index>(r), p);
            double mean = kernels::sum(col.data(), n_rows) / static_cast<double>(n_rows);
            double ss = kernels::sum_sq_dev(col.data(), n_rows, mean);
            pooled[static_cast<std::size_t>(p)] = std::sqrt(ss / static_cast<double>(n_rows - 1));
        }
    }

    std::vector<long long> sampled_count(static_cast<std::size_t>(K), 0);
    for (std::size_t i = 0; i < frame.n_units(); ++i)
        if (frame.is_sampled(i)) ++sampled_count[static_cast<std::size_t>(strat[i] - 1)];

    std::vector<StratumSummary> out;
    for (int kk = 0; kk < K; ++kk) {
        StratumSummary s;
        s.stratum_id = kk + 1;
        s.pop_size = sizes[static_cast<std::size_t>(kk)];
        s.already_sampled = sampled_count[static_cast<std::size_t>(kk)];
        s.sd_by_param.resize(static_cast<std::size_t>(P));
        for (Eigen::Index p = 0; p < P; ++p) {
            const auto& v = by_stratum[static_cast<std::size_t>(kk)][static_cast<std::size_t>(p)];
            if (v.size() >= 2) {
                double mean = kernels::sum(v.data(), v.size()) / static_cast<double>(v.size());
                double ss = kernels::sum_sq_dev(v.data(), v.size(), mean);
                s.sd_by_param[static_cast<std::size_t>(p)] =
                    std::sqrt(ss / static_cast<double>(v.size() - 1));
            } else {
                if (n_rows < 2)
                    throw FrameError("stratum " + std::to_string(kk + 1) +
                                     " has <2 contributing rows and no pooled fallback");
                s.sd_by_param[static_cast<std::size_t>(p)] = pooled[static_cast<std::size_t>(p)];
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

SamplingFrame read_frame_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FrameError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw FrameError("empty CSV file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> headers;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) headers.push_back(tok);
    }
    std::vector<std::vector<double>> cols(headers.size());
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::size_t c = 0;
        while (std::getline(ss, tok, ',')) {
            if (c >= headers.size()) throw FrameError("row has too many fields");
            cols[c].push_back(std::strtod(tok.c_str(), nullptr));
            ++c;
        }
        if (c != headers.size()) throw FrameError("row has too few fields");
        ++n;
    }
    SamplingFrame frame(n);
    int n_strata = 0;
    std::vector<int> ids;
    for (std::size_t c = 0; c < headers.size(); ++c) {
        if (headers[c] == "stratum") {
            ids.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                ids[i] = static_cast<int>(cols[c][i]);
                n_strata = std::max(n_strata, ids[i]);
            }
        } else {
            frame.add_column(headers[c], std::move(cols[c]));
        }
    }
    if (!ids.empty()) frame.set_stratum_ids(std::move(ids), n_strata);
    return frame;
}

void write_frame_csv(const SamplingFrame& frame, const std::string& path, bool include_stratum) {
    std::ofstream out(path);
    if (!out) throw FrameError("cannot write '" + path + "'");
    const auto& names = frame.column_names();
    for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
    if (include_stratum && frame.n_strata() > 0) out << ",stratum";
    out << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < frame.n_units(); ++i) {
        for (std::size_t c = 0; c < names.size(); ++c)
            out << (c ? "," : "") << frame.column(names[c])[i];
        if (include_stratum && frame.n_strata() > 0) out << "," << frame.stratum_ids()[i];
        out << "\n";
    }
}

}  // namespace mwd
