#include <doctest.h>

#include <algorithm>
#include <random>

#include "attnsense/errors.hpp"
#include "attnsense/text_format.hpp"
#include "attnsense/trace.hpp"
#include "test_support.hpp"

using namespace attnsense;
using attnsense::testing::random_trace_set;
using attnsense::testing::temp_path;

namespace {

const char* kMinimal =
    R"({"schema_version":1,"L":2,"T_max":1,"d":2,"m":1,"n":1,"projections":["key"]})"
    "\n"
    R"({"collection_id":"c","style_id":"a","image_index":0,"layer_id":1,"timestep":1,"projection":"key","mu":[0.5,-1.25],"sigma":[1.0,0.1]})"
    "\n";

bool has_issue(const ValidationReport& r, const std::string& text) {
    return std::any_of(r.issues.begin(), r.issues.end(),
                       [&](const ValidationIssue& i) { return i.message.find(text) != std::string::npos; });
}

}  // namespace

TEST_CASE("minimal well-formed trace file") {
    const TraceSet set = parse_traces(kMinimal);
    CHECK(set.header.layers == 2);
    CHECK(set.header.t_max == 1);
    REQUIRE(set.records.size() == 1);
    CHECK(set.records[0].summary.mu[1] == -1.25);
    CHECK(set.records[0].summary.sigma[1] == 0.1);
    CHECK(validate(set).ok);
}

TEST_CASE("read rejects records outside the header bounds") {
    std::string text = kMinimal;
    text.replace(text.find("\"layer_id\":1"), 12, "\"layer_id\":2");
    try {
        parse_traces(text);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(e.line() == 2);
    }

    std::string wrong_dim = kMinimal;
    wrong_dim.replace(wrong_dim.find("[0.5,-1.25]"), 11, "[0.5]");
    CHECK_THROWS_AS(parse_traces(wrong_dim), SchemaError);

    std::string bad_projection = kMinimal;
    bad_projection.replace(bad_projection.find("\"projection\":\"key\""), 18, "\"projection\":\"value\"");
    CHECK_THROWS_AS(parse_traces(bad_projection), SchemaError);
}

TEST_CASE("read reports malformed lines and unknown fields") {
    std::string text = kMinimal;
    text += "{not json\n";
    try {
        parse_traces(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }

    std::string extra = kMinimal;
    extra.replace(extra.find("\"mu\""), 4, "\"zz\":1,\"mu\"");
    CHECK_THROWS_AS(parse_traces(extra), SchemaError);

    std::string version = kMinimal;
    version.replace(version.find("\"schema_version\":1"), 18, "\"schema_version\":2");
    CHECK_THROWS_AS(parse_traces(version), SchemaError);
    CHECK_THROWS_AS(parse_traces(""), ParseError);
}

TEST_CASE("empty record list writes a header-only file") {
    TraceSet set;
    set.header = {1, 3, 10, 4, 2, 2, {Projection::key, Projection::query}};
    const std::string text = format_traces(set);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    CHECK(parse_traces(text) == set);
}

TEST_CASE("write/read round trip is byte- and value-exact") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        TraceSet set = random_trace_set(rng, 3, 2, 1 + trial % 4, 2, 2, {Projection::key, Projection::value});
        std::shuffle(set.records.begin(), set.records.end(), rng);
        const auto path = temp_path("roundtrip.jsonl");
        write_traces(set, path);
        const std::string first = read_file(path);
        const TraceSet back = read_traces(path);
        TraceSet sorted = set;
        sort_records(sorted.records);
        CHECK(back == sorted);
        write_traces(back, path);
        CHECK(read_file(path) == first);
        CHECK(format_traces(set) == first);
    }
}

TEST_CASE("validate findings") {
    std::mt19937_64 rng(3);
    TraceSet set = random_trace_set(rng, 2, 1, 3, 2, 4);
    CHECK(validate(set).ok);

    SUBCASE("negative sigma") {
        set.records[5].summary.sigma[0] = -0.1;
        const auto report = validate(set);
        CHECK_FALSE(report.ok);
        CHECK(has_issue(report, "negative sigma"));
    }
    SUBCASE("incomplete grid") {
        auto it = std::find_if(set.records.begin(), set.records.end(), [](const TraceRecord& r) {
            return r.style_id == "style0" && r.image_index == 3 && r.layer_id == 1 && r.timestep == 0;
        });
        set.records.erase(it);
        const auto report = validate(set);
        CHECK_FALSE(report.ok);
        CHECK(has_issue(report, "incomplete grid"));
    }
    SUBCASE("non-finite value") {
        set.records[0].summary.mu[1] = std::numeric_limits<double>::quiet_NaN();
        CHECK(has_issue(validate(set), "non-finite"));
    }
    SUBCASE("duplicate key") {
        set.records.push_back(set.records.front());
        CHECK(has_issue(validate(set), "duplicate"));
    }
    SUBCASE("dimension mismatch") {
        set.records[2].summary.mu.conservativeResize(2);
        set.records[2].summary.sigma.conservativeResize(2);
        CHECK(has_issue(validate(set), "dimension mismatch"));
    }
    SUBCASE("zero sigma is accepted") {
        set.records[1].summary.sigma.setZero();
        CHECK(validate(set).ok);
    }
    SUBCASE("invalid sets are not written") {
        set.records[0].summary.sigma[0] = -1;
        CHECK_THROWS_AS(write_traces(set, temp_path("invalid.jsonl")), ContractError);
    }
}

TEST_CASE("validate is order-insensitive") {
    std::mt19937_64 rng(11);
    TraceSet set = random_trace_set(rng, 2, 1, 2, 3, 2);
    set.records[1].summary.sigma[0] = -1;
    set.records.erase(set.records.begin() + 7);
    set.records.push_back(set.records[3]);
    const auto reference = validate(set).issues;
    CHECK_FALSE(reference.empty());
    for (int i = 0; i < 20; ++i) {
        std::shuffle(set.records.begin(), set.records.end(), rng);
        CHECK(validate(set).issues == reference);
    }
}

TEST_CASE("group_by_cell") {
    std::mt19937_64 rng(5);
    TraceSet set = random_trace_set(rng, 2, 0, 3, 2, 2);
    const CellView view = group_by_cell(set, 1, 0, Projection::key);
    CHECK(view.styles() == 2);
    CHECK(view.images() == 2);
    CHECK(view.style_ids == std::vector<std::string>{"style0", "style1"});

    CHECK_THROWS_AS(group_by_cell(set, 2, 0, Projection::key), LookupError);
    CHECK_THROWS_AS(group_by_cell(set, 0, 0, Projection::query), LookupError);

    for (int i = 0; i < 20; ++i) {
        std::shuffle(set.records.begin(), set.records.end(), rng);
        CHECK(group_by_cell(set, 1, 0, Projection::key) == view);
    }

    set.records.erase(std::find_if(set.records.begin(), set.records.end(), [](const TraceRecord& r) {
        return r.layer_id == 0 && r.style_id == "style1" && r.image_index == 0;
    }));
    CHECK_THROWS_AS(group_by_cell(set, 0, 0, Projection::key), ContractError);
}
