#include "fond/report.hpp"

#include "fond/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace fond {

namespace {

std::string num(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

// Quotes a CSV field when it contains a separator or quote.
std::string field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    return os;
}

}  // namespace

MeanSe mean_and_standard_error(std::span<const double> values) {
    MeanSe r;
    if (values.empty()) throw ContractError("aggregate: no repetitions");
    double sum = 0.0;
    for (double v : values) sum += v;
    const double n = static_cast<double>(values.size());
    r.mean = sum / n;
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - r.mean) * (v - r.mean);
        r.se = std::sqrt(sq / (n - 1.0)) / std::sqrt(n);
    }
    return r;
}

std::vector<AggregateCell> aggregate(std::span<const RunRecord> runs) {
    std::vector<AggregateCell> cells;
    std::vector<std::vector<double>> yl, ys;
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
    for (const auto& run : runs) {
        const auto key = std::make_tuple(run.dataset, run.setting, run.algorithm);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, cells.size()).first;
            cells.push_back({run.dataset, run.setting, run.algorithm, 0, {}, {}});
            yl.emplace_back();
            ys.emplace_back();
        }
        const std::size_t c = it->second;
        ++cells[c].repetitions;
        if (run.metrics.y_l_accuracy) yl[c].push_back(*run.metrics.y_l_accuracy);
        if (run.metrics.y_s_accuracy) ys[c].push_back(*run.metrics.y_s_accuracy);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (!yl[c].empty()) cells[c].y_l = mean_and_standard_error(yl[c]);
        if (!ys[c].empty()) cells[c].y_s = mean_and_standard_error(ys[c]);
    }
    return cells;
}

void write_results_csv(std::span<const RunRecord> runs, std::size_t num_classes,
                       const std::filesystem::path& path, const std::string& provenance_json) {
    auto os = open_out(path);
    os << "# provenance " << provenance_json << '\n';
    os << "dataset,setting,algorithm,seed,repetition,y_l_acc,y_s_acc";
    for (std::size_t c = 0; c < num_classes; ++c) os << ",class_" << c << "_acc";
    os << '\n';
    for (const auto& r : runs) {
        os << field(r.dataset) << ',' << field(r.setting) << ',' << field(r.algorithm) << ',' << r.seed << ','
           << r.repetition << ',' << opt_num(r.metrics.y_l_accuracy) << ',' << opt_num(r.metrics.y_s_accuracy);
        for (std::size_t c = 0; c < num_classes; ++c) {
            os << ',';
            auto it = r.metrics.per_class.find(static_cast<int>(c));
            if (it != r.metrics.per_class.end()) os << num(it->second.accuracy);
        }
        os << '\n';
    }
    if (!os) throw IoError("failed writing " + path.string());
}

namespace {

struct TableShape {
    std::vector<std::string> datasets;
    std::vector<std::pair<std::string, std::string>> rows;  // (setting, algorithm)
    std::map<std::tuple<std::string, std::string, std::string>, const AggregateCell*> lookup;
};

TableShape shape_of(std::span<const AggregateCell> cells) {
    TableShape t;
    for (const auto& c : cells) {
        if (std::find(t.datasets.begin(), t.datasets.end(), c.dataset) == t.datasets.end()) t.datasets.push_back(c.dataset);
        const auto row = std::make_pair(c.setting, c.algorithm);
        if (std::find(t.rows.begin(), t.rows.end(), row) == t.rows.end()) t.rows.push_back(row);
        t.lookup[{c.setting, c.algorithm, c.dataset}] = &c;
    }
    return t;
}

}  // namespace

void write_aggregate_csv(std::span<const AggregateCell> cells, const std::filesystem::path& path,
                         const std::string& provenance_json) {
    const TableShape t = shape_of(cells);
    auto os = open_out(path);
    os << "# provenance " << provenance_json << '\n';
    os << "setting,algorithm";
    for (const auto& d : t.datasets) {
        os << ',' << field(d + "_reps") << ',' << field(d + "_y_l_mean") << ',' << field(d + "_y_l_se") << ','
           << field(d + "_y_s_mean") << ',' << field(d + "_y_s_se");
    }
    os << '\n';
    for (const auto& [setting, algorithm] : t.rows) {
        os << field(setting) << ',' << field(algorithm);
        for (const auto& d : t.datasets) {
            auto it = t.lookup.find({setting, algorithm, d});
            if (it == t.lookup.end()) {
                os << ",,,,,";
                continue;
            }
            const AggregateCell& c = *it->second;
            os << ',' << c.repetitions << ',' << num(c.y_l.mean) << ',' << opt_num(c.y_l.se) << ','
               << num(c.y_s.mean) << ',' << opt_num(c.y_s.se);
        }
        os << '\n';
    }
    if (!os) throw IoError("failed writing " + path.string());
}

std::string format_aggregate_table(std::span<const AggregateCell> cells) {
    const TableShape t = shape_of(cells);
    auto pct = [](const MeanSe& m) {
        char buf[64];
        if (m.se) {
            std::snprintf(buf, sizeof(buf), "%.1f ± %.1f", 100.0 * m.mean, 100.0 * *m.se);
        } else {
            std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * m.mean);
        }
        return std::string(buf);
    };
    std::ostringstream os;
    os << "| Setting | Algorithm |";
    for (const auto& d : t.datasets) os << ' ' << d << " Y_L | " << d << " Y_S |";
    os << "\n|---|---|";
    for (std::size_t i = 0; i < t.datasets.size(); ++i) os << "---|---|";
    os << '\n';
    for (const auto& [setting, algorithm] : t.rows) {
        os << "| " << setting << " | " << algorithm << " |";
        for (const auto& d : t.datasets) {
            auto it = t.lookup.find({setting, algorithm, d});
            if (it == t.lookup.end()) {
                os << "  |  |";
            } else {
                os << ' ' << pct(it->second->y_l) << " | " << pct(it->second->y_s) << " |";
            }
        }
        os << '\n';
    }
    return os.str();
}

void dump_embeddings(const ModelParams& params, std::span<const Sample> samples, const SplitPlan& plan,
                     const std::filesystem::path& path, const std::string& provenance_json) {
    auto os = open_out(path);
    os << "# provenance " << provenance_json << '\n';
    os << "id,domain,label,group";
    for (std::size_t k = 0; k < params.config.feature_dim; ++k) os << ",h_" << k;
    os << '\n';
    constexpr std::size_t kChunk = 1024;
    std::string line;
    for (std::size_t start = 0; start < samples.size(); start += kChunk) {
        const auto chunk = samples.subspan(start, std::min(kChunk, samples.size() - start));
        const Tensor2 h = forward_features(params, stack_features(chunk));
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            const Sample& s = chunk[i];
            const char* group = plan.is_linked(s.label) ? "linked" : plan.is_shared(s.label) ? "shared" : "unassigned";
            line = std::to_string(s.id) + ',' + std::to_string(s.domain) + ',' + std::to_string(s.label) + ',' + group;
            for (double v : h.row(i)) {
                line += ',';
                line += num(v);
            }
            line += '\n';
            os << line;
        }
    }
    if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace fond
