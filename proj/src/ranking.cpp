#include "attnsense/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "attnsense/text_format.hpp"

namespace attnsense {

namespace {

constexpr double kFlaggedScore = std::numeric_limits<double>::infinity();

}  // namespace

std::vector<int> LayerRanking::positions() const {
    std::vector<int> pos(static_cast<std::size_t>(layers), -1);
    for (std::size_t i = 0; i < order.size(); ++i) pos[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
    return pos;
}

LayerRanking make_ranking(RankingScope scope, std::vector<double> scores, std::vector<bool> flagged) {
    if (scores.size() != flagged.size()) throw ContractError("scores and flags differ in length");
    LayerRanking ranking;
    ranking.scope = scope;
    ranking.layers = static_cast<int>(scores.size());
    for (std::size_t l = 0; l < scores.size(); ++l) {
        if (flagged[l]) scores[l] = kFlaggedScore;
        else if (!std::isfinite(scores[l])) throw ContractError("non-finite score for layer " + std::to_string(l));
    }
    ranking.order.resize(scores.size());
    std::iota(ranking.order.begin(), ranking.order.end(), 0);
    std::stable_sort(ranking.order.begin(), ranking.order.end(), [&](int a, int b) {
        if (flagged[a] != flagged[b]) return !flagged[a];
        return scores[a] < scores[b];
    });
    for (std::size_t i = 0; i < ranking.order.size();) {
        std::size_t j = i + 1;
        const int first = ranking.order[i];
        while (j < ranking.order.size() && flagged[ranking.order[j]] == flagged[first] &&
               scores[ranking.order[j]] == scores[first])
            ++j;
        if (j - i > 1) ranking.tie_breaks.emplace_back(ranking.order.begin() + i, ranking.order.begin() + j);
        i = j;
    }
    ranking.scores = std::move(scores);
    ranking.flagged = std::move(flagged);
    return ranking;
}

double trimmed_mean(std::span<const double> values) {
    if (values.empty()) throw ContractError("trimmed_mean of an empty sample");
    if (values.size() < 3) {
        long double sum = 0.0L;
        for (double v : values) sum += v;
        return static_cast<double>(sum / values.size());
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    // minmax_element picks the first minimum and the last maximum, so the two
    // indices differ even when every value is equal.
    long double sum = 0.0L;
    for (auto it = values.begin(); it != values.end(); ++it)
        if (it != lo && it != hi) sum += *it;
    return static_cast<double>(sum / (values.size() - 2));
}

SensitivityTable trimmed_aggregate(std::span<const SensitivityTable> tables) {
    if (tables.empty()) throw ContractError("trimmed_aggregate needs at least one table");
    const TableHeader& first = tables.front().header;
    for (const auto& t : tables) {
        const TableHeader& h = t.header;
        if (h.layers != first.layers || h.timesteps != first.timesteps || h.projections != first.projections ||
            h.policy != first.policy)
            throw ContractError("trimmed_aggregate: tables disagree on L, timesteps, projections or policy");
        if (t.cells.size() != tables.front().cells.size())
            throw ContractError("trimmed_aggregate: tables hold different cells");
    }

    SensitivityTable out;
    out.header = first;
    out.header.collection_id.clear();
    for (const auto& t : tables)
        out.header.collection_id += (out.header.collection_id.empty() ? "" : "+") + t.header.collection_id;

    for (const auto& [key, reference] : tables.front().cells) {
        std::vector<double> g, d_in, d_out, all_in, all_out;
        bool any_anti = false;
        for (const auto& t : tables) {
            const auto it = t.cells.find(key);
            if (it == t.cells.end()) throw ContractError("trimmed_aggregate: tables hold different cells");
            const CellScore& s = it->second;
            all_in.push_back(s.d_in);
            all_out.push_back(s.d_out);
            if (s.degenerate()) {
                any_anti = any_anti || s.degeneracy == Degeneracy::anti_clustered;
                continue;
            }
            g.push_back(s.g);
            d_in.push_back(s.d_in);
            d_out.push_back(s.d_out);
        }
        CellScore cell = reference;
        if (g.empty()) {
            cell.d_in = trimmed_mean(all_in);
            cell.d_out = trimmed_mean(all_out);
            cell.g = 0.0;
            cell.degeneracy = any_anti ? Degeneracy::anti_clustered : Degeneracy::uninformative;
        } else {
            cell.g = trimmed_mean(g);
            cell.d_in = trimmed_mean(d_in);
            cell.d_out = trimmed_mean(d_out);
            cell.degeneracy = Degeneracy::none;
        }
        out.cells.emplace(key, cell);
    }
    return out;
}

namespace {

// Resolves the single score per (layer, timestep) that ranking works on.
class CellLookup {
public:
    CellLookup(const SensitivityTable& table, std::optional<Projection> projection) : table_(table) {
        if (table.header.policy == ProjectionPolicy::mean_over_projections) {
            if (projection) throw ContractError("table already averages projections; no projection can be chosen");
            return;
        }
        if (projection) {
            if (std::find(table.header.projections.begin(), table.header.projections.end(), *projection) ==
                table.header.projections.end())
                throw LookupError("projection '" + std::string(to_string(*projection)) + "' not in table");
            projections_ = {*projection};
        } else {
            projections_ = table.header.projections;
        }
    }

    CellScore at(int layer, int timestep) const {
        if (projections_.empty()) return find({layer, timestep, std::nullopt});
        std::vector<CellScore> scores;
        for (auto p : projections_) scores.push_back(find({layer, timestep, p}));
        return scores.size() == 1 ? scores.front() : combine_projections(scores);
    }

private:
    const CellScore& find(const ScoreKey& key) const {
        const auto it = table_.cells.find(key);
        if (it == table_.cells.end())
            throw ContractError("incomplete table: no cell for layer=" + std::to_string(key.layer_id) +
                                " t=" + std::to_string(key.timestep));
        return it->second;
    }

    const SensitivityTable& table_;
    std::vector<Projection> projections_;
};

}  // namespace

LayerRanking rank_layers(const SensitivityTable& table, RankingScope scope, std::optional<Projection> projection) {
    const CellLookup lookup(table, projection);
    const int layers = table.header.layers;
    const auto& timesteps = table.header.timesteps;
    std::vector<double> scores(static_cast<std::size_t>(layers), 0.0);
    std::vector<bool> flagged(static_cast<std::size_t>(layers), false);

    if (scope.kind == RankingScope::Kind::per_timestep) {
        if (!std::binary_search(timesteps.begin(), timesteps.end(), scope.timestep))
            throw LookupError("timestep " + std::to_string(scope.timestep) + " not in table");
        for (int l = 0; l < layers; ++l) {
            const CellScore s = lookup.at(l, scope.timestep);
            flagged[l] = s.degenerate();
            scores[l] = s.g;
        }
        return make_ranking(scope, std::move(scores), std::move(flagged));
    }

    if (timesteps.empty()) throw ContractError("table has no timesteps");
    std::vector<std::vector<CellScore>> cells(static_cast<std::size_t>(layers));
    double worst = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < layers; ++l) {
        for (int t : timesteps) {
            cells[l].push_back(lookup.at(l, t));
            if (!cells[l].back().degenerate()) worst = std::max(worst, cells[l].back().g);
        }
    }
    // A flagged cell counts as the worst numeric score in the table; a layer
    // is flagged only when all of its cells are.
    for (int l = 0; l < layers; ++l) {
        long double sum = 0.0L;
        std::size_t numeric = 0;
        for (const auto& s : cells[l]) {
            if (s.degenerate()) {
                sum += worst;
            } else {
                sum += s.g;
                ++numeric;
            }
        }
        flagged[l] = numeric == 0;
        scores[l] = flagged[l] ? 0.0 : static_cast<double>(sum / cells[l].size());
    }
    return make_ranking(scope, std::move(scores), std::move(flagged));
}

std::vector<LayerRanking> per_timestep_rankings(const SensitivityTable& table, std::optional<Projection> projection) {
    std::vector<LayerRanking> out;
    for (int t : table.header.timesteps) out.push_back(rank_layers(table, RankingScope::at_timestep(t), projection));
    return out;
}

int subset_size(double lambda, int layers) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("lambda must lie in [0, 1]");
    if (layers < 0) throw ContractError("layer count must be nonnegative");
    // The slack absorbs representation error such as 0.35 * 10 = 3.4999999999999996.
    const double k = std::floor(lambda * layers + 0.5 + 1e-9);
    return std::clamp(static_cast<int>(k), 0, layers);
}

std::vector<int> select_top_k(const LayerRanking& ranking, double lambda_s, int layers) {
    if (layers != ranking.layers)
        throw ContractError("ranking covers " + std::to_string(ranking.layers) + " layers, not " + std::to_string(layers));
    const int k = subset_size(lambda_s, layers);
    return {ranking.order.begin(), ranking.order.begin() + k};
}

std::vector<RankStatistic> rank_statistics(std::span<const LayerRanking> rankings) {
    if (rankings.empty()) throw ContractError("rank_statistics needs at least one ranking");
    const int layers = rankings.front().layers;
    std::vector<long double> sum(static_cast<std::size_t>(layers)), sum_sq(static_cast<std::size_t>(layers));
    for (const auto& r : rankings) {
        if (r.layers != layers) throw ContractError("rank_statistics: rankings differ in L");
        const auto pos = r.positions();
        for (int l = 0; l < layers; ++l) {
            sum[l] += pos[l];
            sum_sq[l] += static_cast<long double>(pos[l]) * pos[l];
        }
    }
    std::vector<RankStatistic> stats(static_cast<std::size_t>(layers));
    const long double count = rankings.size();
    for (int l = 0; l < layers; ++l) {
        const long double mean = sum[l] / count;
        const long double var = std::max(0.0L, sum_sq[l] / count - mean * mean);
        stats[l] = {static_cast<double>(mean), static_cast<double>(std::sqrt(var))};
    }
    return stats;
}

LayerRanking trimmed_rank_positions(std::span<const LayerRanking> rankings) {
    if (rankings.empty()) throw ContractError("trimmed_rank_positions needs at least one ranking");
    const int layers = rankings.front().layers;
    std::vector<std::vector<double>> positions(static_cast<std::size_t>(layers));
    for (const auto& r : rankings) {
        if (r.layers != layers) throw ContractError("trimmed_rank_positions: rankings differ in L");
        if (!(r.scope == rankings.front().scope)) throw ContractError("trimmed_rank_positions: rankings differ in scope");
        const auto pos = r.positions();
        for (int l = 0; l < layers; ++l) positions[l].push_back(pos[l]);
    }
    std::vector<double> scores(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l) scores[l] = trimmed_mean(positions[l]);
    return make_ranking(rankings.front().scope, std::move(scores), std::vector<bool>(static_cast<std::size_t>(layers)));
}

namespace {

std::string scope_text(const RankingScope& scope) {
    return scope.kind == RankingScope::Kind::time_averaged ? "time_averaged"
                                                           : "timestep:" + std::to_string(scope.timestep);
}

constexpr std::string_view kRankingMagic = "# attnsense ranking schema_version=1";
constexpr std::string_view kRankingColumns = "rank layer_id score flag";

}  // namespace

std::string format_ranking(const LayerRanking& ranking) {
    std::string out;
    out += kRankingMagic;
    out += " scope=" + scope_text(ranking.scope) + " L=" + std::to_string(ranking.layers) + "\n";
    out += kRankingColumns;
    out += '\n';
    for (std::size_t i = 0; i < ranking.order.size(); ++i) {
        const int layer = ranking.order[i];
        const bool flag = ranking.flagged[layer];
        out += std::to_string(i) + ' ' + std::to_string(layer) + ' ' +
               (flag ? std::string("-") : format_real(ranking.scores[layer])) + ' ' + (flag ? "degenerate" : "ok") +
               '\n';
    }
    return out;
}

LayerRanking parse_ranking(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.size() < 2) throw ParseError(1, "ranking needs a header and a column line");
    const std::string& head = lines[0];
    if (head.rfind(kRankingMagic, 0) != 0) throw ParseError(1, "not a ranking file");

    std::istringstream fields(head.substr(kRankingMagic.size()));
    std::string token;
    std::optional<RankingScope> scope;
    std::optional<int> layers;
    while (fields >> token) {
        if (token.rfind("scope=", 0) == 0) {
            const std::string value = token.substr(6);
            if (value == "time_averaged") scope = RankingScope::averaged();
            else if (value.rfind("timestep:", 0) == 0)
                scope = RankingScope::at_timestep(static_cast<int>(parse_integer(value.substr(9), 1)));
            else throw ParseError(1, "unknown scope '" + value + "'");
        } else if (token.rfind("L=", 0) == 0) {
            layers = static_cast<int>(parse_integer(token.substr(2), 1));
        } else {
            throw SchemaError(1, "unknown header field '" + token + "'");
        }
    }
    if (!scope) throw SchemaError(1, "missing required field 'scope'");
    if (!layers || *layers < 0) throw SchemaError(1, "missing required field 'L'");
    if (lines[1] != kRankingColumns) throw ParseError(2, "unexpected column line");
    if (static_cast<int>(lines.size()) - 2 != *layers)
        throw SchemaError(0, "expected " + std::to_string(*layers) + " ranked layers, found " +
                                 std::to_string(lines.size() - 2));

    std::vector<double> scores(static_cast<std::size_t>(*layers), 0.0);
    std::vector<bool> flagged(static_cast<std::size_t>(*layers), false), seen(static_cast<std::size_t>(*layers), false);
    std::vector<int> order;
    for (std::size_t i = 2; i < lines.size(); ++i) {
        const std::size_t line = i + 1;
        std::istringstream row(lines[i]);
        std::string rank, layer, score, flag, extra;
        if (!(row >> rank >> layer >> score >> flag) || (row >> extra)) throw ParseError(line, "expected 4 columns");
        if (parse_integer(rank, line) != static_cast<long long>(i - 2)) throw SchemaError(line, "ranks must be 0, 1, ...");
        const long long id = parse_integer(layer, line);
        if (id < 0 || id >= *layers) throw SchemaError(line, "layer_id out of range");
        if (seen[id]) throw SchemaError(line, "layer listed twice");
        seen[id] = true;
        order.push_back(static_cast<int>(id));
        if (flag == "degenerate") {
            if (score != "-") throw SchemaError(line, "degenerate layer must have score '-'");
            flagged[id] = true;
        } else if (flag == "ok") {
            scores[id] = parse_real(score, line);
        } else {
            throw ParseError(line, "flag must be 'ok' or 'degenerate'");
        }
    }
    LayerRanking ranking = make_ranking(*scope, std::move(scores), std::move(flagged));
    if (ranking.order != order) throw SchemaError(0, "rows are not in (score, layer_id) order");
    return ranking;
}

LayerRanking read_ranking(const std::filesystem::path& path) { return parse_ranking(read_file(path)); }

void write_ranking(const LayerRanking& ranking, const std::filesystem::path& path) {
    write_file(path, format_ranking(ranking));
}

}  // namespace attnsense
