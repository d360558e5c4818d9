#include "delayflow/csv.hpp"

#include <doctest.h>

#include <sstream>

using namespace delayflow;

TEST_CASE("split_csv_row trims unquoted fields and honors quotes") {
    CHECK(split_csv_row("a, b ,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_csv_row(R"(x,"a, b",y)") == std::vector<std::string>{"x", "a, b", "y"});
    CHECK(split_csv_row(R"("he said ""hi""",2)") == std::vector<std::string>{R"(he said "hi")", "2"});
    CHECK(split_csv_row("a,,c") == std::vector<std::string>{"a", "", "c"});
    CHECK(split_csv_row("") == std::vector<std::string>{""});
}

TEST_CASE("csv_quote round-trips through split_csv_row") {
    for (const std::string field : {"plain", "with, comma", "with \"quote\"", "multi\nline", ""}) {
        const auto row = "left," + csv_quote(field) + ",right";
        const auto fields = split_csv_row(row);
        REQUIRE(fields.size() == 3);
        CHECK(fields[1] == field);
    }
}

TEST_CASE("read_csv_record joins lines while quotes are open") {
    std::istringstream in("a,\"two\nlines\",c\nnext,row,here\n");
    std::string record;
    REQUIRE(read_csv_record(in, record));
    CHECK(split_csv_row(record) == std::vector<std::string>{"a", "two\nlines", "c"});
    REQUIRE(read_csv_record(in, record));
    CHECK(split_csv_row(record) == std::vector<std::string>{"next", "row", "here"});
    CHECK_FALSE(read_csv_record(in, record));
}

TEST_CASE("format_double_exact survives a parse round-trip") {
    for (const double v : {0.0, 1.5, 3.141592653589793, 1e-9, 123456.789}) {
        CHECK(std::stod(format_double_exact(v)) == v);
    }
}
