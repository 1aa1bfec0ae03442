#ifndef ATTNSENSE_SCORING_HPP
#define ATTNSENSE_SCORING_HPP

// Inner/outer cluster distances and the clustering score G = D_in / D_out
// for every (layer, timestep) cell of a trace set. Lower G means the layer
// groups same-style images more tightly relative to cross-style pairs.

#include <compare>
#include <concepts>
#include <type_traits>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "attnsense/divergence.hpp"
#include "attnsense/errors.hpp"
#include "attnsense/trace.hpp"

namespace attnsense {

enum class Degeneracy {
    none,
    uninformative,   // d_in == 0 and d_out == 0
    anti_clustered,  // d_out == 0 < d_in
};

std::string_view to_string(Degeneracy degeneracy);

enum class ProjectionPolicy { per_projection, mean_over_projections };

std::string_view to_string(ProjectionPolicy policy);
ProjectionPolicy parse_projection_policy(std::string_view text);

struct CellScore {
    int layer_id = 0;
    int timestep = 0;
    std::optional<Projection> projection;  // empty: averaged over projections
    double d_in = 0.0;
    double d_out = 0.0;
    double g = 0.0;  // meaningless when degenerate
    Degeneracy degeneracy = Degeneracy::none;

    bool degenerate() const { return degeneracy != Degeneracy::none; }
    bool operator==(const CellScore&) const = default;
};

struct ScoreKey {
    int layer_id = 0;
    int timestep = 0;
    std::optional<Projection> projection;

    auto operator<=>(const ScoreKey&) const = default;
};

struct TableHeader {
    std::string collection_id;
    int layers = 0;
    std::vector<int> timesteps;  // ascending
    std::vector<Projection> projections;
    ProjectionPolicy policy = ProjectionPolicy::mean_over_projections;
    int styles = 0;
    int images = 0;

    bool operator==(const TableHeader&) const = default;
};

struct SensitivityTable {
    TableHeader header;
    std::map<ScoreKey, CellScore> cells;

    const CellScore& at(int layer_id, int timestep, std::optional<Projection> projection = std::nullopt) const;
    bool operator==(const SensitivityTable&) const = default;
};

/// Callable returning the divergence between two summaries.
template <typename F>
concept PairDivergence = std::is_invocable_r_v<double, F&, const GaussianSummary&, const GaussianSummary&>;

namespace detail {

inline void require_cell_shape(const CellView& cell, std::size_t min_styles, std::size_t min_images) {
    if (cell.styles() < min_styles)
        throw ContractError("cell needs at least " + std::to_string(min_styles) + " style clusters, has " +
                            std::to_string(cell.styles()));
    if (cell.images() < min_images)
        throw ContractError("cell needs at least " + std::to_string(min_images) + " images per cluster, has " +
                            std::to_string(cell.images()));
    for (const auto& cluster : cell.clusters)
        if (cluster.size() != cell.images()) throw ContractError("cell clusters differ in size");
}

}  // namespace detail

/// Mean over clusters of the mean JSD over unordered intra-cluster pairs.
/// `divergence(a, b)` is called exactly m * C(n, 2) times.
template <PairDivergence Divergence>
double inner_distance(const CellView& cell, Divergence&& divergence) {
    detail::require_cell_shape(cell, 1, 2);
    const std::size_t n = cell.images();
    const long double pairs = static_cast<long double>(n) * (n - 1) / 2;
    long double total = 0.0L;
    for (const auto& cluster : cell.clusters) {
        long double cluster_sum = 0.0L;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) cluster_sum += divergence(cluster[i], cluster[j]);
        total += cluster_sum / pairs;
    }
    return static_cast<double>(total / cell.styles());
}

inline double inner_distance(const CellView& cell, const DivergenceConfig& cfg = {}) {
    return inner_distance(cell, [&](const GaussianSummary& a, const GaussianSummary& b) { return jsd(a, b, cfg); });
}

/// Mean JSD over all C(m, 2) * n^2 cross-cluster pairs, each unordered
/// cluster pair visited once.
template <PairDivergence Divergence>
double outer_distance(const CellView& cell, Divergence&& divergence) {
    detail::require_cell_shape(cell, 2, 1);
    const std::size_t m = cell.styles();
    const std::size_t n = cell.images();
    long double total = 0.0L;
    for (std::size_t s1 = 0; s1 < m; ++s1)
        for (std::size_t s2 = s1 + 1; s2 < m; ++s2)
            for (const auto& a : cell.clusters[s1])
                for (const auto& b : cell.clusters[s2]) total += divergence(a, b);
    const long double pairs = static_cast<long double>(m) * (m - 1) / 2 * n * n;
    return static_cast<double>(total / pairs);
}

inline double outer_distance(const CellView& cell, const DivergenceConfig& cfg = {}) {
    return outer_distance(cell, [&](const GaussianSummary& a, const GaussianSummary& b) { return jsd(a, b, cfg); });
}

/// Builds a CellScore from precomputed distances, flagging d_out == 0.
CellScore make_cell_score(const CellKey& key, double d_in, double d_out);

template <PairDivergence Divergence>
CellScore clustering_score(const CellView& cell, Divergence&& divergence) {
    detail::require_cell_shape(cell, 2, 2);
    const double d_in = inner_distance(cell, divergence);
    const double d_out = outer_distance(cell, divergence);
    return make_cell_score(cell.key, d_in, d_out);
}

inline CellScore clustering_score(const CellView& cell, const DivergenceConfig& cfg = {}) {
    return clustering_score(cell, [&](const GaussianSummary& a, const GaussianSummary& b) { return jsd(a, b, cfg); });
}

/// Averages per-projection scores of one (layer, timestep). g is the mean
/// over non-degenerate inputs; the result is degenerate only if all are.
CellScore combine_projections(const std::vector<CellScore>& scores);

/// Scores every cell of a validated trace set. Cells are distributed over
/// `threads` workers; the result does not depend on the worker count.
SensitivityTable sensitivity_table(const TraceSet& set, const DivergenceConfig& cfg = {},
                                   ProjectionPolicy policy = ProjectionPolicy::mean_over_projections,
                                   unsigned threads = 1);

std::string format_table(const SensitivityTable& table);
SensitivityTable parse_table(std::string_view text);
SensitivityTable read_table(const std::filesystem::path& path);
void write_table(const SensitivityTable& table, const std::filesystem::path& path);

}  // namespace attnsense

#endif  // ATTNSENSE_SCORING_HPP
