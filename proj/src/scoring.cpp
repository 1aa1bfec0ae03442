#include "attnsense/scoring.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <mutex>
#include <thread>

#include "attnsense/text_format.hpp"

namespace attnsense {

std::string_view to_string(Degeneracy degeneracy) {
    switch (degeneracy) {
        case Degeneracy::none: return "none";
        case Degeneracy::uninformative: return "uninformative";
        case Degeneracy::anti_clustered: return "anti_clustered";
    }
    return "?";
}

std::string_view to_string(ProjectionPolicy policy) {
    return policy == ProjectionPolicy::per_projection ? "per_projection" : "mean_over_projections";
}

ProjectionPolicy parse_projection_policy(std::string_view text) {
    if (text == "per_projection") return ProjectionPolicy::per_projection;
    if (text == "mean_over_projections") return ProjectionPolicy::mean_over_projections;
    throw ContractError("unknown projection policy '" + std::string(text) + "'");
}

const CellScore& SensitivityTable::at(int layer_id, int timestep, std::optional<Projection> projection) const {
    const auto it = cells.find(ScoreKey{layer_id, timestep, projection});
    if (it == cells.end())
        throw LookupError("no score for layer=" + std::to_string(layer_id) + " t=" + std::to_string(timestep));
    return it->second;
}

CellScore make_cell_score(const CellKey& key, double d_in, double d_out) {
    CellScore score;
    score.layer_id = key.layer_id;
    score.timestep = key.timestep;
    score.projection = key.projection;
    score.d_in = d_in;
    score.d_out = d_out;
    if (d_out > 0.0) {
        score.g = d_in / d_out;
    } else {
        score.g = 0.0;
        score.degeneracy = d_in > 0.0 ? Degeneracy::anti_clustered : Degeneracy::uninformative;
    }
    return score;
}

CellScore combine_projections(const std::vector<CellScore>& scores) {
    if (scores.empty()) throw ContractError("no projection scores to combine");
    CellScore out;
    out.layer_id = scores.front().layer_id;
    out.timestep = scores.front().timestep;
    out.projection = std::nullopt;
    long double d_in = 0.0L, d_out = 0.0L, g = 0.0L;
    std::size_t numeric = 0;
    bool any_anti = false;
    for (const auto& s : scores) {
        if (s.layer_id != out.layer_id || s.timestep != out.timestep)
            throw ContractError("combine_projections: scores from different cells");
        d_in += s.d_in;
        d_out += s.d_out;
        if (s.degenerate()) {
            any_anti = any_anti || s.degeneracy == Degeneracy::anti_clustered;
        } else {
            g += s.g;
            ++numeric;
        }
    }
    out.d_in = static_cast<double>(d_in / scores.size());
    out.d_out = static_cast<double>(d_out / scores.size());
    if (numeric == 0) {
        out.degeneracy = any_anti ? Degeneracy::anti_clustered : Degeneracy::uninformative;
    } else {
        out.g = static_cast<double>(g / numeric);
    }
    return out;
}

namespace {

std::string summarize(const ValidationReport& report) {
    std::string text;
    std::size_t shown = 0;
    for (const auto& issue : report.issues) {
        if (issue.severity != Severity::error) continue;
        if (shown == 5) {
            text += "; ...";
            break;
        }
        text += (shown ? "; " : "") + issue.location + ": " + issue.message;
        ++shown;
    }
    return text;
}

}  // namespace

SensitivityTable sensitivity_table(const TraceSet& set, const DivergenceConfig& cfg, ProjectionPolicy policy,
                                   unsigned threads) {
    const ValidationReport report = validate(set);
    if (!report.ok) throw ValidationError("trace set does not validate: " + summarize(report));

    const auto index = index_cells(set);

    // One work item per output cell; under the mean policy an item covers
    // every projection of a (layer, timestep).
    std::vector<std::vector<CellKey>> items;
    for (const auto& [key, indices] : index) {
        if (policy == ProjectionPolicy::mean_over_projections && !items.empty() &&
            items.back().front().layer_id == key.layer_id && items.back().front().timestep == key.timestep)
            items.back().push_back(key);
        else
            items.push_back({key});
    }

    std::vector<CellScore> results(items.size());
    auto score_item = [&](std::size_t i) {
        std::vector<CellScore> per_projection;
        for (const CellKey& key : items[i])
            per_projection.push_back(clustering_score(make_cell_view(set, key, index.at(key)), cfg));
        results[i] = policy == ProjectionPolicy::per_projection ? per_projection.front()
                                                                 : combine_projections(per_projection);
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(items.size())));
    if (workers <= 1) {
        for (std::size_t i = 0; i < items.size(); ++i) score_item(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < items.size(); i = next++) {
                    try {
                        score_item(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        pool.clear();
        if (failure) std::rethrow_exception(failure);
    }

    SensitivityTable table;
    TableHeader& h = table.header;
    std::set<std::string> collections;
    std::set<int> timesteps;
    for (const auto& r : set.records) {
        collections.insert(r.collection_id);
        timesteps.insert(r.timestep);
    }
    for (const auto& id : collections) h.collection_id += (h.collection_id.empty() ? "" : ",") + id;
    h.layers = set.header.layers;
    h.timesteps.assign(timesteps.begin(), timesteps.end());
    h.projections = set.header.projections;
    h.policy = policy;
    h.styles = set.header.styles;
    h.images = set.header.images;
    for (const auto& score : results) table.cells.emplace(ScoreKey{score.layer_id, score.timestep, score.projection}, score);
    return table;
}

namespace {

constexpr int kTableSchemaVersion = 1;

Json real_or_null(const CellScore& s) { return s.degenerate() ? Json(nullptr) : Json(s.g); }

}  // namespace

std::string format_table(const SensitivityTable& table) {
    const TableHeader& h = table.header;
    Json header;
    header["schema_version"] = kTableSchemaVersion;
    header["kind"] = "sensitivity_table";
    header["collection_id"] = h.collection_id;
    header["L"] = h.layers;
    header["timesteps"] = h.timesteps;
    header["projections"] = Json::array();
    for (auto p : h.projections) header["projections"].push_back(std::string(to_string(p)));
    header["policy"] = std::string(to_string(h.policy));
    header["m"] = h.styles;
    header["n"] = h.images;

    std::string out = header.dump() + '\n';
    for (const auto& [key, s] : table.cells) {
        Json obj;
        obj["layer_id"] = s.layer_id;
        obj["timestep"] = s.timestep;
        obj["projection"] = s.projection ? std::string(to_string(*s.projection)) : std::string("mean");
        obj["d_in"] = s.d_in;
        obj["d_out"] = s.d_out;
        obj["g"] = real_or_null(s);
        obj["degenerate"] = std::string(to_string(s.degeneracy));
        out += obj.dump() + '\n';
    }
    return out;
}

SensitivityTable parse_table(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw ParseError(1, "missing header line");
    const Json head = parse_json_object(lines[0], 1);
    check_members(head, {"schema_version", "kind", "collection_id", "L", "timesteps", "projections", "policy", "m", "n"},
                  {}, 1, "table header");
    if (member<int>(head, "schema_version", 1) != kTableSchemaVersion)
        throw SchemaError(1, "unsupported schema_version");
    if (member<std::string>(head, "kind", 1) != "sensitivity_table") throw SchemaError(1, "not a sensitivity table");

    SensitivityTable table;
    TableHeader& h = table.header;
    h.collection_id = member<std::string>(head, "collection_id", 1);
    h.layers = member<int>(head, "L", 1);
    h.timesteps = member<std::vector<int>>(head, "timesteps", 1);
    if (h.layers < 1) throw SchemaError(1, "L must be positive");
    if (!std::is_sorted(h.timesteps.begin(), h.timesteps.end()) ||
        std::adjacent_find(h.timesteps.begin(), h.timesteps.end()) != h.timesteps.end())
        throw SchemaError(1, "timesteps must be strictly ascending");
    try {
        for (const auto& p : member<std::vector<std::string>>(head, "projections", 1))
            h.projections.push_back(parse_projection(p));
        h.policy = parse_projection_policy(member<std::string>(head, "policy", 1));
    } catch (const ContractError& e) {
        throw SchemaError(1, e.what());
    }
    h.styles = member<int>(head, "m", 1);
    h.images = member<int>(head, "n", 1);

    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line = i + 1;
        const Json obj = parse_json_object(lines[i], line);
        check_members(obj, {"layer_id", "timestep", "projection", "d_in", "d_out", "g", "degenerate"}, {}, line, "cell");
        CellScore s;
        s.layer_id = member<int>(obj, "layer_id", line);
        s.timestep = member<int>(obj, "timestep", line);
        const auto projection = member<std::string>(obj, "projection", line);
        if (projection == "mean") {
            if (h.policy != ProjectionPolicy::mean_over_projections)
                throw SchemaError(line, "projection 'mean' requires policy mean_over_projections");
        } else {
            if (h.policy != ProjectionPolicy::per_projection)
                throw SchemaError(line, "per-projection cell in a mean_over_projections table");
            try {
                s.projection = parse_projection(projection);
            } catch (const ContractError& e) {
                throw SchemaError(line, e.what());
            }
        }
        s.d_in = member<double>(obj, "d_in", line);
        s.d_out = member<double>(obj, "d_out", line);
        const auto degenerate = member<std::string>(obj, "degenerate", line);
        if (degenerate == "none") s.degeneracy = Degeneracy::none;
        else if (degenerate == "uninformative") s.degeneracy = Degeneracy::uninformative;
        else if (degenerate == "anti_clustered") s.degeneracy = Degeneracy::anti_clustered;
        else throw SchemaError(line, "unknown degenerate value '" + degenerate + "'");
        if (s.degenerate()) {
            if (!obj.at("g").is_null()) throw SchemaError(line, "degenerate cell must have g = null");
        } else {
            s.g = member<double>(obj, "g", line);
        }
        if (s.layer_id < 0 || s.layer_id >= h.layers) throw SchemaError(line, "layer_id out of range");
        if (!std::binary_search(h.timesteps.begin(), h.timesteps.end(), s.timestep))
            throw SchemaError(line, "timestep not listed in header");
        if (!table.cells.emplace(ScoreKey{s.layer_id, s.timestep, s.projection}, s).second)
            throw SchemaError(line, "duplicate cell");
    }
    return table;
}

SensitivityTable read_table(const std::filesystem::path& path) { return parse_table(read_file(path)); }

void write_table(const SensitivityTable& table, const std::filesystem::path& path) {
    write_file(path, format_table(table));
}

}  // namespace attnsense
