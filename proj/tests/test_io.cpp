#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "tailqr/io.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace tailqr;

TEST_CASE("csv: quoted fields, embedded separators and CRLF") {
    const auto rows = io::parse_csv("a,\"b,c\",\"say \"\"hi\"\"\"\r\n1,\"two\nlines\",3\r\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == io::CsvRow{"a", "b,c", "say \"hi\""});
    CHECK(rows[1] == io::CsvRow{"1", "two\nlines", "3"});
}

TEST_CASE("csv: escape round trip") {
    const io::CsvRow row{"plain", "com,ma", "quo\"te", "new\nline", ""};
    const auto back = io::parse_csv(io::join_csv(row) + "\n");
    REQUIRE(back.size() == 1);
    CHECK(back[0] == row);
}

TEST_CASE("format_double round-trips bit for bit") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 2000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        CHECK(io::parse_double(io::format_double(v)) == v);
    }
    CHECK(io::format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(std::isnan(io::parse_double("nan")));
}

TEST_CASE("parse_double is strict") {
    CHECK(std::isnan(io::parse_double("")));
    CHECK(std::isnan(io::parse_double("NA")));
    CHECK(io::parse_double(" 1.5 ") == 1.5);
    CHECK_THROWS_AS(io::parse_double("1.5x"), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_double("abc"), std::invalid_argument);
}

TEST_CASE("git blob hash matches git hash-object") {
    CHECK(io::git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(io::git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("atomic write replaces content and leaves no temp files") {
    const auto dir = oracle::scratch_dir("io");
    io::write_file_atomic(dir / "f.txt", "one");
    io::write_file_atomic(dir / "f.txt", "two");
    CHECK(io::read_file(dir / "f.txt") == "two");
    int n = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++n;
    CHECK(n == 1);
}
