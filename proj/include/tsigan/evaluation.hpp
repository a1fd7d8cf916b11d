#pragma once

#include "tsigan/series.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tsigan {

struct MatchCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

/// A truth interval is a TP when any prediction overlaps it and an FN otherwise; a
/// prediction overlapping no truth interval is an FP. Overlap is inclusive.
MatchCounts match(std::span<const AnomalyInterval> truth, std::span<const AnomalyInterval> preds);

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Standard ratios with every 0/0 taken as 0.
Metrics precision_f1(const MatchCounts& counts);

/// Arithmetic mean. Throws EmptyList.
double aggregate(std::span<const double> values);

struct DatasetResult {
    std::string dataset;
    MatchCounts counts;
};

/// CSV `dataset,tp,fp,fn,precision,recall,f1`, one row per dataset and a final `mean` row
/// with summed counts and averaged precision, recall and F1. Throws EmptyList.
void write_report(std::ostream& out, std::span<const DatasetResult> rows);

} // namespace tsigan
