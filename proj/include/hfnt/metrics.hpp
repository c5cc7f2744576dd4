#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>

namespace hfnt {

struct Confusion {
    long tp = 0;
    long tn = 0;
    long fp = 0;
    long fn = 0;

    long total() const { return tp + tn + fp + fn; }
};

// Scalar evaluation record for one model on one data split.
struct EvalResult {
    double mse = 0.0;
    double rmse = 0.0;
    double half_mse = 0.0;
    std::optional<double> correlation;   // absent when either vector is constant
    std::optional<double> accuracy;      // classification only
    Confusion confusion;                 // binary classification only
};

inline double mse(std::span<const double> desired, std::span<const double> predicted) {
    if (desired.size() != predicted.size())
        throw std::invalid_argument("mse: length mismatch");
    if (desired.empty())
        throw std::invalid_argument("mse: empty vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < desired.size(); ++i) {
        const double e = desired[i] - predicted[i];
        acc += e * e;
    }
    return acc / static_cast<double>(desired.size());
}

inline double half_mse(std::span<const double> desired, std::span<const double> predicted) {
    return 0.5 * mse(desired, predicted);
}

inline double rmse(std::span<const double> desired, std::span<const double> predicted) {
    return std::sqrt(mse(desired, predicted));
}

// Pearson correlation coefficient; empty when either vector has zero variance.
inline std::optional<double> correlation(std::span<const double> d, std::span<const double> y) {
    if (d.size() != y.size())
        throw std::invalid_argument("correlation: length mismatch");
    if (d.size() < 2)
        throw std::invalid_argument("correlation: need at least 2 samples");
    const double n = static_cast<double>(d.size());
    double md = 0.0, my = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        md += d[i];
        my += y[i];
    }
    md /= n;
    my /= n;
    double sdd = 0.0, syy = 0.0, sdy = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double a = d[i] - md;
        const double b = y[i] - my;
        sdd += a * a;
        syy += b * b;
        sdy += a * b;
    }
    if (sdd == 0.0 || syy == 0.0)
        return std::nullopt;
    return sdy / std::sqrt(sdd * syy);
}

// Binary decision rule on the scaled output range.
inline int classify_binary(double output) { return output >= 0.5 ? 1 : 0; }

// One-tree-per-class rule: argmax of outputs, ties to the lowest class id.
inline int classify_multiclass(std::span<const double> outputs) {
    if (outputs.empty())
        throw std::invalid_argument("classify_multiclass: no outputs");
    std::size_t best = 0;
    for (std::size_t j = 1; j < outputs.size(); ++j)
        if (outputs[j] > outputs[best])
            best = j;
    return static_cast<int>(best);
}

inline double accuracy(const Confusion& c) {
    const long total = c.total();
    if (total == 0)
        throw std::invalid_argument("accuracy: zero total");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
}

// alpha * E + (1 - alpha) * D
inline double scalarized(double error, double complexity, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("scalarized: alpha outside [0,1]");
    return alpha * error + (1.0 - alpha) * complexity;
}

inline EvalResult evaluate_regression(std::span<const double> desired,
                                      std::span<const double> predicted) {
    EvalResult r;
    r.mse = mse(desired, predicted);
    r.rmse = std::sqrt(r.mse);
    r.half_mse = 0.5 * r.mse;
    r.correlation = correlation(desired, predicted);
    return r;
}

// Binary classification: labels and predictions are 0/1; raw outputs give MSE.
inline EvalResult evaluate_binary(std::span<const double> labels,
                                  std::span<const double> raw_outputs) {
    EvalResult r;
    r.mse = mse(labels, raw_outputs);
    r.rmse = std::sqrt(r.mse);
    r.half_mse = 0.5 * r.mse;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int truth = labels[i] >= 0.5 ? 1 : 0;
        const int pred = classify_binary(raw_outputs[i]);
        if (truth == 1)
            (pred == 1 ? r.confusion.tp : r.confusion.fn)++;
        else
            (pred == 0 ? r.confusion.tn : r.confusion.fp)++;
    }
    r.accuracy = accuracy(r.confusion);
    return r;
}

} // namespace hfnt
