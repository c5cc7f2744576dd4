#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfnt/rng.hpp"

namespace hfnt {

enum class TaskKind { classification, regression, timeseries };

inline std::string to_string(TaskKind t) {
    switch (t) {
    case TaskKind::classification: return "classification";
    case TaskKind::regression: return "regression";
    case TaskKind::timeseries: return "timeseries";
    }
    return "?";
}

inline TaskKind task_from_string(const std::string& s) {
    if (s == "classification") return TaskKind::classification;
    if (s == "regression") return TaskKind::regression;
    if (s == "timeseries") return TaskKind::timeseries;
    throw std::invalid_argument("unknown task kind: " + s);
}

// Affine column scaling onto [0,1]. A constant column is flagged (lo == hi)
// and maps to 0.5 so it stays selectable without a divide-by-zero.
struct ColumnScale {
    double lo = 0.0;
    double hi = 1.0;

    bool constant() const { return hi <= lo; }

    double scale(double x) const { return constant() ? 0.5 : (x - lo) / (hi - lo); }

    double descale(double y) const { return constant() ? lo : lo + y * (hi - lo); }
};

// CSV parse failure; rows are 1-based data rows, columns 0-based cells.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string msg, std::size_t row, std::size_t column)
        : std::runtime_error(std::move(msg)), row(row), column(column) {}

    std::size_t row;
    std::size_t column;
};

// Feature matrix plus targets. Features are stored row-major. Classification
// targets hold contiguous label ids starting at 0; regression/time-series
// targets are real values. Immutable by convention after construction.
struct Dataset {
    std::vector<double> features; // rows * cols, row-major
    std::size_t n_cols = 0;
    std::vector<double> targets;
    std::vector<std::string> feature_names;
    std::vector<ColumnScale> feature_norms; // filled by scale()
    std::optional<ColumnScale> target_norm; // regression/timeseries after scale()
    TaskKind task = TaskKind::regression;
    int n_classes = 0;                      // classification only
    std::vector<std::string> class_labels;  // original label spellings

    std::size_t rows() const { return n_cols == 0 ? 0 : features.size() / n_cols; }
    std::size_t cols() const { return n_cols; }

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * n_cols, n_cols};
    }

    double& at(std::size_t i, std::size_t j) { return features[i * n_cols + j]; }
    double at(std::size_t i, std::size_t j) const { return features[i * n_cols + j]; }
};

struct CsvSchema {
    int target_column = -1;
    bool has_header = false;
    char delimiter = ',';
    TaskKind task = TaskKind::regression;
};

namespace detail {

// RFC-4180-style field splitting: quoted fields may contain the delimiter,
// doubled quotes, and newlines (the caller feeds whole records).
inline std::vector<std::string> split_record(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == delim) {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline bool record_complete(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
    }
    return !quoted;
}

inline std::optional<double> parse_number(std::string field) {
    // trim ascii whitespace
    const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    std::size_t b = 0, e = field.size();
    while (b < e && is_ws(field[b])) ++b;
    while (e > b && is_ws(field[e - 1])) --e;
    if (b == e) return std::nullopt;
    const char* first = field.data() + b;
    const char* last = field.data() + e;
    double v = 0.0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last) return std::nullopt;
    return v;
}

} // namespace detail

// Loads a delimited text file with one sample per row. Exactly one column is
// the target; all remaining columns must be numeric features. Rows with
// missing cells are rejected.
inline Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open file: " + path.string());

    std::vector<std::vector<std::string>> records;
    std::string line, record;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        record = record.empty() ? line : record + "\n" + line;
        if (!detail::record_complete(record)) continue; // quoted newline
        if (!record.empty())
            records.push_back(detail::split_record(record, schema.delimiter));
        record.clear();
    }
    if (!record.empty()) // unterminated quote at EOF; surface it as a bad row
        records.push_back(detail::split_record(record, schema.delimiter));
    if (records.empty())
        throw std::runtime_error("empty file: " + path.string());

    Dataset ds;
    ds.task = schema.task;

    std::size_t first_data = 0;
    const std::size_t width = records[0].size();
    if (schema.target_column < 0 || static_cast<std::size_t>(schema.target_column) >= width)
        throw std::invalid_argument("target column out of range");
    if (width < 2)
        throw std::runtime_error("need at least one feature column and one target column");

    if (schema.has_header) {
        for (std::size_t j = 0; j < width; ++j)
            if (j != static_cast<std::size_t>(schema.target_column))
                ds.feature_names.push_back(records[0][j]);
        first_data = 1;
        if (records.size() == 1)
            throw std::runtime_error("no data rows in: " + path.string());
    } else {
        for (std::size_t j = 0, n = 1; j < width; ++j)
            if (j != static_cast<std::size_t>(schema.target_column))
                ds.feature_names.push_back("x" + std::to_string(n++));
    }

    ds.n_cols = width - 1;
    std::vector<std::string> raw_targets;
    for (std::size_t r = first_data; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::size_t data_row = r - first_data + 1; // 1-based
        if (rec.size() != width)
            throw ParseError("row " + std::to_string(data_row) + ": expected " +
                                 std::to_string(width) + " cells, got " +
                                 std::to_string(rec.size()),
                             data_row, rec.size());
        for (std::size_t j = 0; j < width; ++j) {
            if (j == static_cast<std::size_t>(schema.target_column)) {
                raw_targets.push_back(rec[j]);
                continue;
            }
            auto v = detail::parse_number(rec[j]);
            if (!v)
                throw ParseError("row " + std::to_string(data_row) + ", column " +
                                     std::to_string(j) + ": not a number: '" + rec[j] + "'",
                                 data_row, j);
            ds.features.push_back(*v);
        }
    }

    if (schema.task == TaskKind::classification) {
        // Contiguous ids from 0, ordered numerically when all labels parse
        // as numbers, lexicographically otherwise.
        std::vector<std::string> labels = raw_targets;
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        bool all_numeric = true;
        std::vector<std::pair<double, std::string>> numeric;
        for (const auto& s : labels) {
            auto v = detail::parse_number(s);
            if (!v) { all_numeric = false; break; }
            numeric.emplace_back(*v, s);
        }
        if (all_numeric) {
            std::sort(numeric.begin(), numeric.end());
            labels.clear();
            for (auto& [v, s] : numeric) labels.push_back(s);
        }
        std::map<std::string, int> id;
        for (std::size_t i = 0; i < labels.size(); ++i) id[labels[i]] = static_cast<int>(i);
        ds.class_labels = labels;
        ds.n_classes = static_cast<int>(labels.size());
        for (const auto& s : raw_targets) ds.targets.push_back(id.at(s));
    } else {
        for (std::size_t i = 0; i < raw_targets.size(); ++i) {
            auto v = detail::parse_number(raw_targets[i]);
            if (!v)
                throw ParseError("row " + std::to_string(i + 1) + ", column " +
                                     std::to_string(schema.target_column) +
                                     ": target not a number: '" + raw_targets[i] + "'",
                                 i + 1, static_cast<std::size_t>(schema.target_column));
            ds.targets.push_back(*v);
        }
    }
    return ds;
}

// Maps every feature column affinely onto [0,1] and records the inverse
// mapping. Classification targets stay as label ids; regression and
// time-series targets get their own [0,1] scaling pair.
inline Dataset scale(const Dataset& input) {
    Dataset ds = input;
    ds.feature_norms.assign(ds.n_cols, {});
    const std::size_t n = ds.rows();
    if (n == 0) return ds;
    for (std::size_t j = 0; j < ds.n_cols; ++j) {
        double lo = ds.at(0, j), hi = ds.at(0, j);
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, ds.at(i, j));
            hi = std::max(hi, ds.at(i, j));
        }
        ds.feature_norms[j] = {lo, hi};
        for (std::size_t i = 0; i < n; ++i)
            ds.at(i, j) = ds.feature_norms[j].scale(ds.at(i, j));
    }
    if (ds.task != TaskKind::classification) {
        double lo = ds.targets[0], hi = ds.targets[0];
        for (double t : ds.targets) {
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
        ds.target_norm = ColumnScale{lo, hi};
        for (double& t : ds.targets) t = ds.target_norm->scale(t);
    }
    return ds;
}

// Inverse of the target scaling map; identity when the dataset never had its
// targets scaled (classification).
inline double descale_output(double y_scaled, const Dataset& ds) {
    if (!ds.target_norm) return y_scaled;
    return ds.target_norm->descale(y_scaled);
}

inline Dataset subset(const Dataset& ds, std::span<const std::size_t> idx) {
    Dataset out;
    out.n_cols = ds.n_cols;
    out.feature_names = ds.feature_names;
    out.feature_norms = ds.feature_norms;
    out.target_norm = ds.target_norm;
    out.task = ds.task;
    out.n_classes = ds.n_classes;
    out.class_labels = ds.class_labels;
    out.features.reserve(idx.size() * ds.n_cols);
    out.targets.reserve(idx.size());
    for (std::size_t i : idx) {
        auto r = ds.row(i);
        out.features.insert(out.features.end(), r.begin(), r.end());
        out.targets.push_back(ds.targets[i]);
    }
    return out;
}

// One-vs-rest target copy for class c: target 1 where the label equals c.
inline Dataset one_hot(const Dataset& ds, int c) {
    Dataset out = ds;
    for (double& t : out.targets) t = (static_cast<int>(t) == c) ? 1.0 : 0.0;
    return out;
}

// Sliding-window embedding of a univariate series: row i holds
// series[i .. i+d) and predicts series[i+d+horizon-1].
inline Dataset lag_embed(std::span<const double> series, std::size_t d, std::size_t horizon) {
    if (d == 0 || horizon == 0)
        throw std::invalid_argument("lag_embed: d and horizon must be positive");
    if (series.size() <= d + horizon - 1)
        throw std::invalid_argument("lag_embed: series too short for window");
    Dataset ds;
    ds.task = TaskKind::timeseries;
    ds.n_cols = d;
    const std::size_t n = series.size() - d - horizon + 1;
    ds.features.reserve(n * d);
    ds.targets.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) ds.features.push_back(series[i + j]);
        ds.targets.push_back(series[i + d + horizon - 1]);
    }
    for (std::size_t j = 1; j <= d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
    return ds;
}

// Mackey-Glass delay series: dx/dt = a x(t-tau) / (1 + x(t-tau)^10) - b x(t)
// with tau=17, a=0.2, b=0.1, integrated by 4th-order Runge-Kutta at step 0.1
// and sampled at unit time intervals after discarding the transient. The seed
// only perturbs the initial history level.
inline std::vector<double> mackey_glass(std::size_t n, std::uint64_t seed) {
    if (n == 0)
        throw std::invalid_argument("mackey_glass: n must be positive");
    constexpr double a = 0.2, b = 0.1, tau = 17.0, h = 0.1;
    constexpr int lag_steps = static_cast<int>(tau / h);       // 170
    constexpr int steps_per_sample = static_cast<int>(1.0 / h); // 10
    constexpr int transient_samples = 100;

    Rng rng = Rng::stream(seed, "mackey-glass");
    const double x0 = rng.uniform(0.9, 1.3);

    const std::size_t total_steps =
        static_cast<std::size_t>(transient_samples + n) * steps_per_sample;
    std::vector<double> buf(total_steps + lag_steps + 1, x0);

    const auto deriv = [&](double x, double x_tau) {
        const double p2 = x_tau * x_tau;
        const double x10 = p2 * p2 * p2 * p2 * p2;
        return a * x_tau / (1.0 + x10) - b * x;
    };

    for (std::size_t s = lag_steps; s < buf.size() - 1; ++s) {
        const double x = buf[s];
        const double xt0 = buf[s - lag_steps];
        const double xt1 = buf[s - lag_steps + 1];
        const double xt_half = 0.5 * (xt0 + xt1);
        const double k1 = deriv(x, xt0);
        const double k2 = deriv(x + 0.5 * h * k1, xt_half);
        const double k3 = deriv(x + 0.5 * h * k2, xt_half);
        const double k4 = deriv(x + h * k3, xt1);
        buf[s + 1] = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = buf[lag_steps +
                     static_cast<std::size_t>(transient_samples + i) * steps_per_sample];
    return out;
}

} // namespace hfnt
