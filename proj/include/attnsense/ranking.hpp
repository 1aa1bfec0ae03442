#ifndef ATTNSENSE_RANKING_HPP
#define ATTNSENSE_RANKING_HPP

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnsense/scoring.hpp"

namespace attnsense {

struct RankingScope {
    enum class Kind { per_timestep, time_averaged };

    Kind kind = Kind::time_averaged;
    int timestep = 0;  // only meaningful for per_timestep

    static RankingScope averaged() { return {}; }
    static RankingScope at_timestep(int t) { return {Kind::per_timestep, t}; }

    bool operator==(const RankingScope& other) const {
        return kind == other.kind && (kind == Kind::time_averaged || timestep == other.timestep);
    }
};

/// Layers ordered most sensitive first (ascending score). Flagged layers
/// come after every scored layer; ties break by ascending layer_id.
struct LayerRanking {
    RankingScope scope;
    int layers = 0;
    std::vector<int> order;
    std::vector<double> scores;  // indexed by layer_id
    std::vector<bool> flagged;   // indexed by layer_id
    std::vector<std::vector<int>> tie_breaks;  // groups of >= 2 layers sharing a score

    /// Position of each layer in `order`, indexed by layer_id.
    std::vector<int> positions() const;
    bool operator==(const LayerRanking&) const = default;
};

/// Orders layers by (flagged, score, layer_id) and fills the tie groups.
LayerRanking make_ranking(RankingScope scope, std::vector<double> scores, std::vector<bool> flagged);

/// Per cell: drop one minimum and one maximum g and average the rest;
/// plain mean for fewer than three inputs. Degenerate inputs are left out,
/// and the output cell is degenerate only when every input is.
SensitivityTable trimmed_aggregate(std::span<const SensitivityTable> tables);

/// Trimmed mean of a sample with the rule above.
double trimmed_mean(std::span<const double> values);

/// Ranks the table's layers at one timestep or by their mean over
/// timesteps. A table with several projections is collapsed to their mean
/// unless `projection` picks one.
LayerRanking rank_layers(const SensitivityTable& table, RankingScope scope,
                         std::optional<Projection> projection = std::nullopt);

std::vector<LayerRanking> per_timestep_rankings(const SensitivityTable& table,
                                                std::optional<Projection> projection = std::nullopt);

/// round-half-up(lambda * layers).
int subset_size(double lambda, int layers);

std::vector<int> select_top_k(const LayerRanking& ranking, double lambda_s, int layers);

struct RankStatistic {
    double mean_rank = 0.0;
    double std_rank = 0.0;  // population
};

std::vector<RankStatistic> rank_statistics(std::span<const LayerRanking> rankings);

/// Alternative aggregation over repeated runs: trims each layer's rank
/// positions instead of its scores, then ranks by the trimmed position.
LayerRanking trimmed_rank_positions(std::span<const LayerRanking> rankings);

std::string format_ranking(const LayerRanking& ranking);
LayerRanking parse_ranking(std::string_view text);
LayerRanking read_ranking(const std::filesystem::path& path);
void write_ranking(const LayerRanking& ranking, const std::filesystem::path& path);

}  // namespace attnsense

#endif  // ATTNSENSE_RANKING_HPP
