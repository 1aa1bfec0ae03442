#include <doctest.h>

#include <random>

#include "attnsense/philox.hpp"
#include "attnsense/ranking.hpp"
#include "attnsense/synth.hpp"

using namespace attnsense;

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using C = Philox4x32::Counter;
    CHECK(Philox4x32({0, 0})(C{0, 0, 0, 0}) == C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32({0xffffffffu, 0xffffffffu})(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}) ==
          C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32({0xa4093822u, 0x299f31d0u})(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}) ==
          C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("synth normals look standard") {
    double sum = 0, sum_sq = 0;
    const int count = 20000;
    for (int c = 0; c < count; ++c) {
        const double z = synth_normal(3, SynthStream::mu_noise, 1, 2, 3, 4, Projection::key, c);
        sum += z;
        sum_sq += z * z;
    }
    CHECK(std::abs(sum / count) < 0.05);
    CHECK(std::abs(sum_sq / count - 1.0) < 0.05);
}

namespace {

SynthConfig small_config() {
    SynthConfig cfg;
    cfg.styles = 3;
    cfg.images = 3;
    cfg.layers = 6;
    cfg.timesteps = {0, 10};
    cfg.dim = 5;
    cfg.seed = 1234;
    cfg.planted = {{4, 10.0}};
    return cfg;
}

}  // namespace

TEST_CASE("generate_planted") {
    const SynthConfig cfg = small_config();
    const PlantedSet a = generate_planted(cfg);
    CHECK(validate(a.traces).ok);
    CHECK(a.truth.sensitive_layers == std::set<int>{4});
    CHECK(a.truth.separations.at(4) == 10.0);
    CHECK(a.traces.records.size() == 3u * 3 * 6 * 2);
    CHECK(format_traces(generate_planted(cfg).traces) == format_traces(a.traces));

    const SensitivityTable table = sensitivity_table(a.traces);
    for (int t : cfg.timesteps) {
        const auto ranking = rank_layers(table, RankingScope::at_timestep(t));
        CHECK(ranking.order.front() == 4);
        CHECK(ranking.scores[4] < ranking.scores[ranking.order[1]]);
    }
}

TEST_CASE("records are pure functions of their coordinates") {
    const SynthConfig cfg = small_config();
    const TraceSet set = generate_planted(cfg).traces;
    const auto& r = set.records[17];
    const int s = std::stoi(r.style_id.substr(5));
    for (int c = 0; c < cfg.dim; ++c) {
        const double center = synth_normal(cfg.seed, SynthStream::center, 0, 0, r.layer_id, r.timestep, r.projection, c);
        const double eps = synth_normal(cfg.seed, SynthStream::mu_noise, s, r.image_index, r.layer_id, r.timestep,
                                        r.projection, c);
        const double offset = cfg.planted.count(r.layer_id)
                                  ? synth_normal(cfg.seed, SynthStream::offset, s, 0, r.layer_id, r.timestep, r.projection, c)
                                  : 0.0;
        const double sep = cfg.planted.count(r.layer_id) ? cfg.planted.at(r.layer_id) : 0.0;
        CHECK(r.summary.mu[c] == center + cfg.base_sigma * (sep * offset + cfg.intra_spread * eps));
    }

    // More layers do not change the records of the existing ones.
    SynthConfig wider = cfg;
    wider.layers = 9;
    const TraceSet more = generate_planted(wider).traces;
    for (const auto& rec : set.records) {
        const auto it = std::find_if(more.records.begin(), more.records.end(), [&](const TraceRecord& x) {
            return x.style_id == rec.style_id && x.image_index == rec.image_index && x.layer_id == rec.layer_id &&
                   x.timestep == rec.timestep;
        });
        REQUIRE(it != more.records.end());
        CHECK(it->summary == rec.summary);
    }
}

TEST_CASE("generate_null") {
    SynthConfig cfg = small_config();
    const TraceSet null_set = generate_null(cfg);
    CHECK(validate(null_set).ok);

    SynthConfig zero = cfg;
    zero.planted = {{4, 0.0}};
    CHECK(generate_planted(zero).traces == null_set);

    SynthConfig other = cfg;
    other.seed = 99;
    CHECK_FALSE(generate_null(other).records.front().summary == null_set.records.front().summary);
}

TEST_CASE("independent null rankings overlap like random subsets") {
    // Expected overlap of two random 30-of-70 subsets is 30*30/70.
    SynthConfig cfg;
    cfg.styles = 3;
    cfg.images = 2;
    cfg.layers = 70;
    cfg.dim = 4;
    double total = 0;
    const int pairs = 100;
    for (int p = 0; p < pairs; ++p) {
        cfg.seed = 1000 + 2 * p;
        const auto a = rank_layers(sensitivity_table(generate_null(cfg)), RankingScope::averaged());
        cfg.seed = 1001 + 2 * p;
        const auto b = rank_layers(sensitivity_table(generate_null(cfg)), RankingScope::averaged());
        auto top_a = select_top_k(a, 0.43, 70), top_b = select_top_k(b, 0.43, 70);
        std::sort(top_a.begin(), top_a.end());
        std::sort(top_b.begin(), top_b.end());
        std::vector<int> common;
        std::set_intersection(top_a.begin(), top_a.end(), top_b.begin(), top_b.end(), std::back_inserter(common));
        total += common.size();
    }
    CHECK(total / pairs == doctest::Approx(900.0 / 70).epsilon(0.08));
}

TEST_CASE("config and ground truth files") {
    const SynthConfig cfg = small_config();
    CHECK(parse_synth_config(format_synth_config(cfg)) == cfg);
    const GroundTruth truth = generate_planted(cfg).truth;
    CHECK(parse_ground_truth(format_ground_truth(truth)) == truth);

    const SynthConfig minimal = parse_synth_config(R"({"m":2,"n":2,"L":3,"timesteps":[0],"d":2,"seed":7})");
    CHECK(minimal.planted.empty());
    CHECK(minimal.base_sigma == 1.0);
    CHECK_THROWS_AS(parse_synth_config(R"({"m":2,"n":2,"L":3,"timesteps":[0],"d":2,"seed":7,"bogus":1})"), SchemaError);
    CHECK_THROWS_AS(parse_synth_config(R"({"m":2,"n":2,"L":3,"timesteps":[0],"d":2,"seed":7,"planted":[{"layer_id":3,"separation":1}]})"),
                    SchemaError);
}
