#pragma once

#include "tsigan/series.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tsigan {

enum class SeriesFormat { ucr_txt, csv };

struct DatasetDescriptor {
    std::filesystem::path path;
    SeriesFormat format = SeriesFormat::ucr_txt;
    std::optional<std::size_t> train_end;
    std::optional<AnomalyInterval> truth;
};

struct UcrName {
    std::size_t train_end = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Last three underscore-separated integer fields of the file stem, e.g.
/// "004_UCR_Anomaly_2500_5400_5600.txt" -> (2500, 5400, 5600). Throws MalformedName.
UcrName parse_ucr_filename(std::string_view name);

/// `.csv` (any case) is csv; everything else is read as whitespace-separated numbers.
SeriesFormat format_from_path(const std::filesystem::path& path);

/// Format from the extension; train_end and truth from a UCR-style name when it parses.
DatasetDescriptor describe(const std::filesystem::path& path);

/// ucr_txt: whitespace-separated numbers, any number per line.
/// csv: header row naming a `value` column and optionally a `label` column (0/1); labelled
/// samples become one truth interval from the first to the last label 1. Descriptor
/// fields take precedence over labels. Throws ParseError (1-based line), EmptyFile,
/// InvalidArgument when the descriptor does not fit the series.
TimeSeries load_series(const DatasetDescriptor& descriptor);
TimeSeries read_series(std::istream& in, SeriesFormat format, std::string name = {});

/// "a:b" as an inclusive interval. Throws InvalidArgument.
AnomalyInterval parse_interval(std::string_view text);

/// Detections CSV with a `begin,end` header. Throws ParseError.
std::vector<AnomalyInterval> read_intervals_csv(std::istream& in);
std::vector<AnomalyInterval> read_intervals_csv(const std::filesystem::path& path);

} // namespace tsigan
