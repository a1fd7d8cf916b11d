#include "tsigan/error.hpp"
#include "tsigan/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tsigan;

namespace {

TimeSeries parse(const std::string& text, SeriesFormat format = SeriesFormat::ucr_txt)
{
    std::istringstream in(text);
    return read_series(in, format, "inline");
}

std::size_t parse_error_line(const std::string& text, SeriesFormat format)
{
    try {
        parse(text, format);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "tsigan_test_io";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("UCR file names")
{
    const UcrName a = parse_ucr_filename("004_UCR_Anomaly_2500_5400_5600.txt");
    CHECK(a.train_end == 2500);
    CHECK(a.begin == 5400);
    CHECK(a.end == 5600);
    const UcrName b = parse_ucr_filename("a_b_10_20_30.txt");
    CHECK(b.train_end == 10);
    CHECK(b.begin == 20);
    CHECK(b.end == 30);
    const UcrName c = parse_ucr_filename("/data/UCR/025_UCR_Anomaly_DISTORTEDGP711MarkerLFM5z2_5000_6168_6212.txt");
    CHECK(c.train_end == 5000);
    CHECK(c.begin == 6168);
    CHECK(c.end == 6212);
    CHECK(parse_ucr_filename("x_7_7_7").begin == 7);

    CHECK_THROWS_AS(parse_ucr_filename("a_b_10_30_20.txt"), MalformedName);
    CHECK_THROWS_AS(parse_ucr_filename("a_b_20_30.txt"), MalformedName);
    CHECK_THROWS_AS(parse_ucr_filename("series.txt"), MalformedName);
    CHECK_THROWS_AS(parse_ucr_filename("a_10_x20_30.txt"), MalformedName);
    CHECK_THROWS_AS(parse_ucr_filename("a_10_-20_30.txt"), MalformedName);
}

TEST_CASE("plain numeric files")
{
    const TimeSeries s = parse("1\n2\n3");
    CHECK(s.values == std::vector<double>{1, 2, 3});
    CHECK(s.length() == 3);
    CHECK_FALSE(s.truth.has_value());
    CHECK(parse("  1.5e1   -2 \n\n\t+3\r\n4 5\n").values == std::vector<double>{15, -2, 3, 4, 5});
}

TEST_CASE("parse errors carry the line number")
{
    CHECK(parse_error_line("1\nabc\n3", SeriesFormat::ucr_txt) == 2);
    CHECK(parse_error_line("1\n2\n\n4 5x", SeriesFormat::ucr_txt) == 4);
    CHECK(parse_error_line("nan\n", SeriesFormat::ucr_txt) == 1);
    CHECK(parse_error_line("1\ninf\n", SeriesFormat::ucr_txt) == 2);
    CHECK(parse_error_line("value\n1\nabc\n", SeriesFormat::csv) == 3);
    CHECK(parse_error_line("time,label\n1,0\n", SeriesFormat::csv) == 1);
    CHECK(parse_error_line("value,label\n1,0\n2\n", SeriesFormat::csv) == 3);
    CHECK(parse_error_line("value,label\n1,0\n2,3\n", SeriesFormat::csv) == 3);
}

TEST_CASE("empty inputs")
{
    CHECK_THROWS_AS(parse(""), EmptyFile);
    CHECK_THROWS_AS(parse(" \n\n\t\n"), EmptyFile);
    CHECK_THROWS_AS(parse("", SeriesFormat::csv), EmptyFile);
    CHECK_THROWS_AS(parse("value,label\n", SeriesFormat::csv), EmptyFile);
}

TEST_CASE("csv labels become one truth interval")
{
    const TimeSeries s = parse("timestamp,value,label\n0,1.0,0\n1,2.0,0\n2,3.0,1\n3,4.0,1\n4,5.0,0\n",
                               SeriesFormat::csv);
    CHECK(s.values == std::vector<double>{1, 2, 3, 4, 5});
    REQUIRE(s.truth.has_value());
    CHECK(*s.truth == AnomalyInterval{3, 4});

    const TimeSeries spread = parse("Value,Label\n1,1\n2,0\n3,1\n", SeriesFormat::csv);
    CHECK(*spread.truth == AnomalyInterval{1, 3});

    const TimeSeries plain = parse("\"value\"\n1\n2\n", SeriesFormat::csv);
    CHECK(plain.values == std::vector<double>{1, 2});
    CHECK_FALSE(plain.truth.has_value());
}

TEST_CASE("formats and descriptors from paths")
{
    CHECK(format_from_path("a/b.csv") == SeriesFormat::csv);
    CHECK(format_from_path("a/b.CSV") == SeriesFormat::csv);
    CHECK(format_from_path("a/b.txt") == SeriesFormat::ucr_txt);
    CHECK(format_from_path("a/b") == SeriesFormat::ucr_txt);

    const DatasetDescriptor ucr = describe("dir/001_UCR_Anomaly_x_3_5_6.txt");
    CHECK(ucr.format == SeriesFormat::ucr_txt);
    CHECK(*ucr.train_end == 3);
    CHECK(*ucr.truth == AnomalyInterval{5, 6});
    const DatasetDescriptor generic = describe("dir/plain.csv");
    CHECK(generic.format == SeriesFormat::csv);
    CHECK_FALSE(generic.train_end.has_value());
    CHECK_FALSE(generic.truth.has_value());
}

TEST_CASE("load_series applies file-name annotations")
{
    const auto path = scratch("001_UCR_Anomaly_x_3_5_6.txt");
    std::ofstream(path) << "1\n2\n3\n4\n5\n6\n7\n";
    const TimeSeries s = load_series(describe(path));
    CHECK(s.length() == 7);
    CHECK(s.name == "001_UCR_Anomaly_x_3_5_6");
    CHECK(*s.train_end == 3);
    CHECK(*s.truth == AnomalyInterval{5, 6});

    const auto beyond = scratch("001_UCR_Anomaly_x_3_5_60.txt");
    std::ofstream(beyond) << "1\n2\n3\n";
    CHECK_THROWS_AS(load_series(describe(beyond)), InvalidArgument);
    CHECK_THROWS_AS(load_series(describe(scratch("missing.txt"))), InvalidArgument);
}

TEST_CASE("intervals")
{
    CHECK(parse_interval("5400:5600") == AnomalyInterval{5400, 5600});
    CHECK(parse_interval(" 7 : 7 ") == AnomalyInterval{7, 7});
    CHECK_THROWS_AS(parse_interval("5600:5400"), InvalidArgument);
    CHECK_THROWS_AS(parse_interval("0:3"), InvalidArgument);
    CHECK_THROWS_AS(parse_interval("12"), InvalidArgument);
    CHECK_THROWS_AS(parse_interval("a:b"), InvalidArgument);

    std::istringstream ok("begin,end\n10,20\n\n30,30\n");
    CHECK(read_intervals_csv(ok) == std::vector<AnomalyInterval>{{10, 20}, {30, 30}});
    std::istringstream none("begin,end\n");
    CHECK(read_intervals_csv(none).empty());
    std::istringstream no_header("10,20\n");
    CHECK_THROWS_AS(read_intervals_csv(no_header), ParseError);
    std::istringstream reversed("begin,end\n20,10\n");
    CHECK_THROWS_AS(read_intervals_csv(reversed), ParseError);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_intervals_csv(empty), EmptyFile);
}
