#include <doctest.h>

#include <random>

#include "attnsense/plan.hpp"
#include "attnsense/text_format.hpp"
#include "test_support.hpp"

using namespace attnsense;
using attnsense::testing::temp_path;

namespace {

LayerRanking ranking_of(int layers, std::uint64_t seed, RankingScope scope = RankingScope::averaged()) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> g(static_cast<std::size_t>(layers));
    for (auto& v : g) v = u(rng);
    return make_ranking(scope, g, std::vector<bool>(static_cast<std::size_t>(layers)));
}

ConditioningPlan random_plan(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> layers_dist(1, 80);
    const int layers = layers_dist(rng);
    const SchedulerSpec scheduler{1000, std::uniform_int_distribution<int>(0, 100)(rng), 30};
    std::vector<LayerRanking> per_t;
    for (int t : {900, 500, 120})
        per_t.push_back(ranking_of(layers, rng(), RankingScope::at_timestep(t)));
    const StructureKnobs knobs{u(rng), u(rng), u(rng), u(rng)};
    return make_plan(layers, scheduler, build_style_plan(ranking_of(layers, rng()), u(rng), scheduler, true, per_t),
                     build_structure_plan(u(rng), scheduler, knobs), "up=40-69 mid=30-39");
}

}  // namespace

TEST_CASE("style plan") {
    const SchedulerSpec scheduler{1000, 0, 50};
    const LayerRanking ranking = ranking_of(70, 1);
    const StyleSection style = build_style_plan(ranking, 0.43, scheduler);
    CHECK(style.layers.size() == 30);
    CHECK(std::equal(style.layers.begin(), style.layers.end(), ranking.order.begin()));
    CHECK(build_style_plan(ranking, 0.0, scheduler).layers.empty());
    CHECK_THROWS_AS(build_style_plan(ranking, 0.43, scheduler, true), ContractError);
}

TEST_CASE("per-timestep overrides only where the subset changes") {
    const SchedulerSpec scheduler{1000, 0, 50};
    const std::vector<double> g{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    const auto averaged = make_ranking(RankingScope::averaged(), g, std::vector<bool>(6));
    std::vector<LayerRanking> per_t;
    for (int t : {999, 600, 300}) {
        auto scores = g;
        if (t == 600) std::swap(scores[2], scores[4]);  // changes the top-3 set
        if (t == 300) std::swap(scores[0], scores[1]);  // reorders inside it
        per_t.push_back(make_ranking(RankingScope::at_timestep(t), scores, std::vector<bool>(6)));
    }
    const StyleSection style = build_style_plan(averaged, 0.5, scheduler, true, per_t);
    REQUIRE(style.per_timestep_overrides.size() == 1);
    CHECK(style.per_timestep_overrides.count(600) == 1);
    CHECK(style.per_timestep_overrides.at(600) == std::vector<int>{0, 1, 4});

    const auto plan = make_plan(6, scheduler, style, build_structure_plan(0.15, scheduler));
    CHECK(mask_for(plan, 4, 600).style_on);
    CHECK_FALSE(mask_for(plan, 2, 600).style_on);
    CHECK(mask_for(plan, 2, 601).style_on);
}

TEST_CASE("structure plan cutoff") {
    const SchedulerSpec scheduler{1000, 0, 50};
    CHECK(build_structure_plan(0.15, scheduler).up_cutoff_timestep == 850);
    CHECK(build_structure_plan(1.0, scheduler).up_cutoff_timestep == 0);
    CHECK(build_structure_plan(0.0, scheduler).up_cutoff_timestep == 1000);
    CHECK(build_structure_plan(0.5, SchedulerSpec{999, 1, 20}).up_cutoff_timestep == 500);
    CHECK_THROWS_AS(build_structure_plan(1.2, scheduler), ContractError);
    CHECK_THROWS_AS(build_structure_plan(0.5, SchedulerSpec{0, 0, 1}), ContractError);

    int previous = 1000;
    for (int i = 0; i <= 100; ++i) {
        const int cutoff = build_structure_plan(i / 100.0, scheduler).up_cutoff_timestep;
        CHECK(cutoff <= previous);
        previous = cutoff;
    }
}

TEST_CASE("mask_for") {
    const SchedulerSpec scheduler{1000, 0, 50};
    const LayerRanking ranking = ranking_of(70, 2);
    const StructureKnobs knobs{0.9, 0.3, 0.15, 0.5};
    const auto plan = make_plan(70, scheduler, build_style_plan(ranking, 0.43, scheduler),
                                build_structure_plan(0.15, scheduler, knobs));
    const int top = ranking.order.front(), bottom = ranking.order.back();
    for (int t : {0, 400, 1000}) {
        CHECK(mask_for(plan, top, t).style_on);
        CHECK_FALSE(mask_for(plan, bottom, t).style_on);
    }
    CHECK(mask_for(plan, top, 900).structure_up_on);
    CHECK_FALSE(mask_for(plan, top, 800).structure_up_on);
    CHECK_FALSE(mask_for(plan, top, 850).structure_up_on);
    const LayerMask m = mask_for(plan, 5, 10);
    CHECK(m.global_scale == 0.9);
    CHECK(m.mid_scale == 0.3);
    CHECK(m.down_scale == 0.15);
    CHECK(m.conv_scale == 0.5);
    CHECK_THROWS_AS(mask_for(plan, 70, 10), LookupError);
    CHECK_THROWS_AS(mask_for(plan, 0, 1001), LookupError);
}

TEST_CASE("mask_for agrees with the raw plan fields") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const ConditioningPlan plan = random_plan(rng);
        for (int l = 0; l < plan.layers; ++l)
            for (int t = plan.scheduler.t_end; t <= plan.scheduler.t_start; t += 37) {
                const auto it = plan.style.per_timestep_overrides.find(t);
                const auto& subset = it == plan.style.per_timestep_overrides.end() ? plan.style.layers : it->second;
                const bool style_on = std::count(subset.begin(), subset.end(), l) == 1;
                const LayerMask m = mask_for(plan, l, t);
                CHECK(m.style_on == style_on);
                CHECK(m.structure_up_on == (t > plan.structure.up_cutoff_timestep));
            }
    }
}

TEST_CASE("plan file round trip") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 25; ++trial) {
        const ConditioningPlan plan = random_plan(rng);
        const auto path = temp_path("plan.json");
        emit_plan(plan, path);
        const std::string first = read_file(path);
        const ConditioningPlan back = read_plan(path);
        CHECK(back == plan);
        emit_plan(back, path);
        CHECK(read_file(path) == first);
    }
}

TEST_CASE("plan parse errors") {
    std::mt19937_64 rng(5);
    const std::string text = format_plan(random_plan(rng));

    std::string missing = text;
    missing.replace(missing.find("\"lambda_mid\""), 12, "\"lambda_xyz\"");
    try {
        parse_plan(missing);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("lambda_xyz") != std::string::npos);
    }

    auto obj = Json::parse(text);
    obj["structure"].erase("lambda_t");
    try {
        parse_plan(obj.dump());
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("'lambda_t'") != std::string::npos);
    }

    auto tampered = Json::parse(text);
    tampered["structure"]["up_cutoff_timestep"] = tampered["structure"]["up_cutoff_timestep"].get<int>() + 1;
    CHECK_THROWS_AS(parse_plan(tampered.dump()), SchemaError);
    CHECK_THROWS_AS(parse_plan("{"), ParseError);
}
