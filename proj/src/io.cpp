#include "tsigan/io.hpp"

#include "tsigan/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

namespace tsigan {

namespace {

std::string_view trim(std::string_view s)
{
    const auto space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && space(s.back())) {
        s.remove_suffix(1);
    }
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = s.substr(1, s.size() - 2);
    }
    return s;
}

std::optional<std::size_t> to_index(std::string_view s)
{
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

double to_value(std::string_view s, std::size_t line)
{
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(line, "'" + std::string(s) + "' is not a number");
    }
    if (!std::isfinite(v)) {
        throw ParseError(line, "non-finite value '" + std::string(s) + "'");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = line.find(sep, pos);
        fields.push_back(trim(line.substr(pos, next - pos)));
        if (next == std::string_view::npos) {
            return fields;
        }
        pos = next + 1;
    }
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return out;
}

std::vector<double> read_numbers(std::istream& in)
{
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view rest(line);
        while (true) {
            rest = trim(rest);
            if (rest.empty()) {
                break;
            }
            const auto stop = std::find_if(rest.begin(), rest.end(), [](char c) {
                return std::isspace(static_cast<unsigned char>(c)) != 0 || c == ',';
            });
            const std::size_t len = std::size_t(stop - rest.begin());
            values.push_back(to_value(rest.substr(0, len), line_no));
            rest.remove_prefix(std::min(rest.size(), len + 1));
        }
    }
    return values;
}

void read_csv(std::istream& in, TimeSeries& series)
{
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> value_col;
    std::optional<std::size_t> label_col;
    std::size_t columns = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            const auto header = split(line, ',');
            columns = header.size();
            for (std::size_t c = 0; c < header.size(); ++c) {
                const std::string name = lower(header[c]);
                if (name == "value") {
                    value_col = c;
                } else if (name == "label") {
                    label_col = c;
                }
            }
            break;
        }
    }
    if (columns == 0) {
        throw EmptyFile("'" + series.name + "' has no header row");
    }
    if (!value_col) {
        throw ParseError(line_no, "header has no 'value' column");
    }

    std::optional<std::size_t> first_label;
    std::size_t last_label = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() != columns) {
            throw ParseError(line_no, "expected " + std::to_string(columns) + " fields, got " +
                                          std::to_string(fields.size()));
        }
        series.values.push_back(to_value(fields[*value_col], line_no));
        if (label_col) {
            const double label = to_value(fields[*label_col], line_no);
            if (label != 0.0 && label != 1.0) {
                throw ParseError(line_no, "label must be 0 or 1");
            }
            if (label == 1.0) {
                first_label = first_label.value_or(series.values.size());
                last_label = series.values.size();
            }
        }
    }
    if (first_label) {
        series.truth = AnomalyInterval{*first_label, last_label};
    }
}

} // namespace

UcrName parse_ucr_filename(std::string_view name)
{
    const std::string stem = std::filesystem::path(name).stem().string();
    const auto fields = split(stem, '_');
    std::vector<std::size_t> tail;
    for (auto it = fields.rbegin(); it != fields.rend() && tail.size() < 3; ++it) {
        const auto v = to_index(*it);
        if (!v) {
            break;
        }
        tail.push_back(*v);
    }
    if (tail.size() < 3) {
        throw MalformedName("'" + std::string(name) + "' does not end in three integer fields");
    }
    const UcrName out{tail[2], tail[1], tail[0]};
    if (out.begin > out.end) {
        throw MalformedName("'" + std::string(name) + "' has anomaly begin " +
                            std::to_string(out.begin) + " after end " + std::to_string(out.end));
    }
    return out;
}

SeriesFormat format_from_path(const std::filesystem::path& path)
{
    return lower(path.extension().string()) == ".csv" ? SeriesFormat::csv : SeriesFormat::ucr_txt;
}

DatasetDescriptor describe(const std::filesystem::path& path)
{
    DatasetDescriptor d{path, format_from_path(path), std::nullopt, std::nullopt};
    try {
        const UcrName ucr = parse_ucr_filename(path.filename().string());
        d.train_end = ucr.train_end;
        d.truth = AnomalyInterval{ucr.begin, ucr.end};
    } catch (const MalformedName&) {
        // Generic file without UCR annotations.
    }
    return d;
}

TimeSeries read_series(std::istream& in, SeriesFormat format, std::string name)
{
    TimeSeries s;
    s.name = std::move(name);
    if (format == SeriesFormat::csv) {
        read_csv(in, s);
    } else {
        s.values = read_numbers(in);
    }
    if (s.values.empty()) {
        throw EmptyFile("'" + s.name + "' contains no samples");
    }
    return s;
}

TimeSeries load_series(const DatasetDescriptor& d)
{
    std::ifstream in(d.path);
    if (!in) {
        throw InvalidArgument("cannot open '" + d.path.string() + "'");
    }
    TimeSeries s = read_series(in, d.format, d.path.stem().string());
    if (d.truth) {
        s.truth = d.truth;
    }
    if (d.train_end) {
        s.train_end = d.train_end;
    }
    s.validate();
    return s;
}

AnomalyInterval parse_interval(std::string_view text)
{
    const std::size_t colon = text.find(':');
    const auto begin = colon == std::string_view::npos ? std::nullopt : to_index(trim(text.substr(0, colon)));
    const auto end = colon == std::string_view::npos ? std::nullopt : to_index(trim(text.substr(colon + 1)));
    if (!begin || !end || *begin < 1 || *begin > *end) {
        throw InvalidArgument("'" + std::string(text) + "' is not an interval 'begin:end' with 1 <= begin <= end");
    }
    return {*begin, *end};
}

std::vector<AnomalyInterval> read_intervals_csv(std::istream& in)
{
    std::vector<AnomalyInterval> out;
    std::string line;
    std::size_t line_no = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split(line, ',');
        if (header) {
            header = false;
            if (fields.size() >= 2 && lower(fields[0]) == "begin" && lower(fields[1]) == "end") {
                continue;
            }
            throw ParseError(line_no, "expected a 'begin,end' header");
        }
        const auto begin = fields.size() == 2 ? to_index(fields[0]) : std::nullopt;
        const auto end = fields.size() == 2 ? to_index(fields[1]) : std::nullopt;
        if (!begin || !end || *begin < 1 || *begin > *end) {
            throw ParseError(line_no, "expected 'begin,end' with 1 <= begin <= end");
        }
        out.push_back({*begin, *end});
    }
    if (header) {
        throw EmptyFile("detections file is empty");
    }
    return out;
}

std::vector<AnomalyInterval> read_intervals_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open '" + path.string() + "'");
    }
    return read_intervals_csv(in);
}

} // namespace tsigan
