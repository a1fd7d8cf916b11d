#include "tsigan/evaluation.hpp"

#include "tsigan/error.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

namespace tsigan {

MatchCounts match(std::span<const AnomalyInterval> truth, std::span<const AnomalyInterval> preds)
{
    MatchCounts c;
    for (const AnomalyInterval& t : truth) {
        const bool hit = std::any_of(preds.begin(), preds.end(),
                                     [&t](const AnomalyInterval& p) { return p.overlaps(t); });
        ++(hit ? c.tp : c.fn);
    }
    for (const AnomalyInterval& p : preds) {
        const bool hit = std::any_of(truth.begin(), truth.end(),
                                     [&p](const AnomalyInterval& t) { return t.overlaps(p); });
        if (!hit) {
            ++c.fp;
        }
    }
    return c;
}

namespace {

double ratio(double num, double den)
{
    return den > 0.0 ? num / den : 0.0;
}

} // namespace

Metrics precision_f1(const MatchCounts& c)
{
    Metrics m;
    m.precision = ratio(double(c.tp), double(c.tp + c.fp));
    m.recall = ratio(double(c.tp), double(c.tp + c.fn));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    return m;
}

double aggregate(std::span<const double> values)
{
    if (values.empty()) {
        throw EmptyList("cannot average an empty list");
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
}

void write_report(std::ostream& out, std::span<const DatasetResult> rows)
{
    if (rows.empty()) {
        throw EmptyList("report has no datasets");
    }
    out << "dataset,tp,fp,fn,precision,recall,f1\n";
    MatchCounts total;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    for (const DatasetResult& r : rows) {
        const Metrics m = precision_f1(r.counts);
        out << r.dataset << ',' << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ','
            << m.precision << ',' << m.recall << ',' << m.f1 << '\n';
        total.tp += r.counts.tp;
        total.fp += r.counts.fp;
        total.fn += r.counts.fn;
        precision.push_back(m.precision);
        recall.push_back(m.recall);
        f1.push_back(m.f1);
    }
    out << "mean," << total.tp << ',' << total.fp << ',' << total.fn << ',' << aggregate(precision)
        << ',' << aggregate(recall) << ',' << aggregate(f1) << '\n';
}

} // namespace tsigan
