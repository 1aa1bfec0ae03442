#include "attnsense/trace.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "attnsense/errors.hpp"
#include "attnsense/text_format.hpp"

namespace attnsense {

std::string_view to_string(Projection projection) {
    switch (projection) {
        case Projection::key: return "key";
        case Projection::query: return "query";
        case Projection::value: return "value";
    }
    return "?";
}

Projection parse_projection(std::string_view text) {
    if (text == "key") return Projection::key;
    if (text == "query") return Projection::query;
    if (text == "value") return Projection::value;
    throw ContractError("unknown projection '" + std::string(text) + "'");
}

namespace {

constexpr int kSchemaVersion = 1;

auto record_order(const TraceRecord& r) {
    return std::tie(r.style_id, r.image_index, r.layer_id, r.timestep, r.projection);
}

std::string describe(const TraceRecord& r) {
    return "style=" + r.style_id + " image=" + std::to_string(r.image_index) + " layer=" +
           std::to_string(r.layer_id) + " t=" + std::to_string(r.timestep) + " " +
           std::string(to_string(r.projection));
}

std::string describe(const CellKey& key) {
    return "layer=" + std::to_string(key.layer_id) + " t=" + std::to_string(key.timestep) + " " +
           std::string(to_string(key.projection));
}

Json vector_json(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& values) {
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

TraceHeader parse_header(const Json& obj) {
    check_members(obj, {"schema_version", "L", "T_max", "d", "m", "n", "projections"}, {}, 1, "header");
    TraceHeader h;
    h.schema_version = member<int>(obj, "schema_version", 1);
    if (h.schema_version != kSchemaVersion)
        throw SchemaError(1, "unsupported schema_version " + std::to_string(h.schema_version));
    h.layers = member<int>(obj, "L", 1);
    h.t_max = member<int>(obj, "T_max", 1);
    h.dim = member<int>(obj, "d", 1);
    h.styles = member<int>(obj, "m", 1);
    h.images = member<int>(obj, "n", 1);
    if (h.layers < 1 || h.t_max < 0 || h.dim < 1 || h.styles < 1 || h.images < 1)
        throw SchemaError(1, "header requires L, d, m, n >= 1 and T_max >= 0");
    for (const auto& name : member<std::vector<std::string>>(obj, "projections", 1)) {
        try {
            h.projections.push_back(parse_projection(name));
        } catch (const ContractError& e) {
            throw SchemaError(1, e.what());
        }
    }
    if (h.projections.empty()) throw SchemaError(1, "header lists no projections");
    return h;
}

TraceRecord parse_record(const Json& obj, const TraceHeader& h, std::size_t line) {
    check_members(obj,
                  {"collection_id", "style_id", "image_index", "layer_id", "timestep", "projection", "mu", "sigma"},
                  {}, line, "record");
    TraceRecord r;
    r.collection_id = member<std::string>(obj, "collection_id", line);
    r.style_id = member<std::string>(obj, "style_id", line);
    r.image_index = member<int>(obj, "image_index", line);
    r.layer_id = member<int>(obj, "layer_id", line);
    r.timestep = member<int>(obj, "timestep", line);
    try {
        r.projection = parse_projection(member<std::string>(obj, "projection", line));
    } catch (const ContractError& e) {
        throw SchemaError(line, e.what());
    }
    const auto mu = member<std::vector<double>>(obj, "mu", line);
    const auto sigma = member<std::vector<double>>(obj, "sigma", line);

    if (r.layer_id < 0 || r.layer_id >= h.layers)
        throw SchemaError(line, "layer_id " + std::to_string(r.layer_id) + " outside [0, " +
                                    std::to_string(h.layers) + ")");
    if (r.timestep < 0 || r.timestep > h.t_max)
        throw SchemaError(line, "timestep " + std::to_string(r.timestep) + " outside [0, " +
                                    std::to_string(h.t_max) + "]");
    if (r.image_index < 0) throw SchemaError(line, "negative image_index");
    if (std::find(h.projections.begin(), h.projections.end(), r.projection) == h.projections.end())
        throw SchemaError(line, "projection '" + std::string(to_string(r.projection)) + "' not declared in header");
    if (static_cast<int>(mu.size()) != h.dim || static_cast<int>(sigma.size()) != h.dim)
        throw SchemaError(line, "mu/sigma length must equal d=" + std::to_string(h.dim));
    r.summary = GaussianSummary(to_vector(mu), to_vector(sigma));
    return r;
}

}  // namespace

void sort_records(std::vector<TraceRecord>& records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const TraceRecord& a, const TraceRecord& b) { return record_order(a) < record_order(b); });
}

TraceSet parse_traces(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw ParseError(1, "missing header line");
    TraceSet set;
    set.header = parse_header(parse_json_object(lines[0], 1));
    set.records.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i)
        set.records.push_back(parse_record(parse_json_object(lines[i], i + 1), set.header, i + 1));
    return set;
}

std::string format_traces(const TraceSet& set) {
    const TraceHeader& h = set.header;
    Json header;
    header["schema_version"] = h.schema_version;
    header["L"] = h.layers;
    header["T_max"] = h.t_max;
    header["d"] = h.dim;
    header["m"] = h.styles;
    header["n"] = h.images;
    header["projections"] = Json::array();
    for (auto p : h.projections) header["projections"].push_back(std::string(to_string(p)));

    std::string out = header.dump();
    out += '\n';

    std::vector<const TraceRecord*> order;
    order.reserve(set.records.size());
    for (const auto& r : set.records) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(),
                     [](const TraceRecord* a, const TraceRecord* b) { return record_order(*a) < record_order(*b); });

    for (const TraceRecord* r : order) {
        Json obj;
        obj["collection_id"] = r->collection_id;
        obj["style_id"] = r->style_id;
        obj["image_index"] = r->image_index;
        obj["layer_id"] = r->layer_id;
        obj["timestep"] = r->timestep;
        obj["projection"] = std::string(to_string(r->projection));
        obj["mu"] = vector_json(r->summary.mu);
        obj["sigma"] = vector_json(r->summary.sigma);
        out += obj.dump();
        out += '\n';
    }
    return out;
}

TraceSet read_traces(const std::filesystem::path& path) { return parse_traces(read_file(path)); }

void write_traces(const TraceSet& set, const std::filesystem::path& path) {
    const ValidationReport report = validate(set);
    if (!report.ok)
        throw ContractError("refusing to write an invalid trace set: " + report.issues.front().message + " (" +
                            report.issues.front().location + ")");
    write_file(path, format_traces(set));
}

ValidationReport validate(const TraceSet& set) {
    const TraceHeader& h = set.header;
    ValidationReport report;
    auto error = [&](std::string location, std::string message) {
        report.issues.push_back({Severity::error, std::move(location), std::move(message)});
    };

    if (h.schema_version != kSchemaVersion) error("header", "unsupported schema_version");
    if (h.layers < 1 || h.dim < 1 || h.styles < 1 || h.images < 1 || h.t_max < 0)
        error("header", "invalid header dimensions");

    std::set<std::tuple<std::string, int, int, int, Projection>> seen;
    // cell -> style -> image indices
    std::map<CellKey, std::map<std::string, std::set<int>>> grid;
    std::set<std::string> styles;

    for (const TraceRecord& r : set.records) {
        const std::string where = describe(r);
        if (r.layer_id < 0 || r.layer_id >= h.layers) error(where, "layer_id out of range");
        if (r.timestep < 0 || r.timestep > h.t_max) error(where, "timestep out of range");
        if (std::find(h.projections.begin(), h.projections.end(), r.projection) == h.projections.end())
            error(where, "projection not declared in header");
        const auto& s = r.summary;
        if (s.mu.size() != h.dim || s.sigma.size() != h.dim) {
            error(where, "dimension mismatch");
        } else {
            if (!s.mu.allFinite() || !s.sigma.allFinite()) error(where, "non-finite value");
            if ((s.sigma.array() < 0.0).any()) error(where, "negative sigma");
        }
        if (!seen.emplace(r.style_id, r.image_index, r.layer_id, r.timestep, r.projection).second)
            error(where, "duplicate record");
        grid[CellKey{r.layer_id, r.timestep, r.projection}][r.style_id].insert(r.image_index);
        styles.insert(r.style_id);
    }

    if (!set.records.empty() && static_cast<int>(styles.size()) != h.styles)
        error("collection", "expected m=" + std::to_string(h.styles) + " styles, found " +
                                std::to_string(styles.size()));

    // Every cell must carry the full grid: the same style set and the same
    // image indices per style across the whole collection.
    std::map<std::string, std::set<int>> images_per_style;
    for (const auto& [cell, by_style] : grid)
        for (const auto& [style, images] : by_style) images_per_style[style].insert(images.begin(), images.end());
    for (const auto& [style, images] : images_per_style)
        if (static_cast<int>(images.size()) != h.images)
            error("style=" + style, "expected n=" + std::to_string(h.images) + " images, found " +
                                        std::to_string(images.size()));

    for (const auto& [cell, by_style] : grid) {
        for (const auto& [style, images] : images_per_style) {
            const auto it = by_style.find(style);
            for (int image : images) {
                if (it == by_style.end() || !it->second.count(image))
                    error(describe(cell), "incomplete grid: missing style=" + style + " image=" +
                                              std::to_string(image));
            }
        }
    }

    std::sort(report.issues.begin(), report.issues.end());
    report.ok = std::none_of(report.issues.begin(), report.issues.end(),
                             [](const ValidationIssue& i) { return i.severity == Severity::error; });
    return report;
}

std::map<CellKey, std::vector<std::size_t>> index_cells(const TraceSet& set) {
    std::map<CellKey, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < set.records.size(); ++i) {
        const auto& r = set.records[i];
        cells[CellKey{r.layer_id, r.timestep, r.projection}].push_back(i);
    }
    for (auto& [key, indices] : cells) {
        std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
            const auto& ra = set.records[a];
            const auto& rb = set.records[b];
            return std::tie(ra.style_id, ra.image_index) < std::tie(rb.style_id, rb.image_index);
        });
    }
    return cells;
}

CellView make_cell_view(const TraceSet& set, const CellKey& key, const std::vector<std::size_t>& indices) {
    CellView view;
    view.key = key;
    for (std::size_t idx : indices) {
        const TraceRecord& r = set.records[idx];
        if (view.style_ids.empty() || view.style_ids.back() != r.style_id) {
            view.style_ids.push_back(r.style_id);
            view.clusters.emplace_back();
        }
        view.clusters.back().push_back(r.summary);
    }
    for (const auto& cluster : view.clusters)
        if (cluster.size() != view.clusters.front().size())
            throw ContractError("incomplete cell " + describe(key) + ": clusters differ in size");
    return view;
}

CellView group_by_cell(const TraceSet& set, int layer_id, int timestep, Projection projection) {
    const CellKey key{layer_id, timestep, projection};
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < set.records.size(); ++i) {
        const auto& r = set.records[i];
        if (r.layer_id == layer_id && r.timestep == timestep && r.projection == projection) indices.push_back(i);
    }
    if (indices.empty()) throw LookupError("no records for cell " + describe(key));
    std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = set.records[a];
        const auto& rb = set.records[b];
        return std::tie(ra.style_id, ra.image_index) < std::tie(rb.style_id, rb.image_index);
    });
    CellView view = make_cell_view(set, key, indices);
    if (static_cast<int>(view.styles()) != set.header.styles || static_cast<int>(view.images()) != set.header.images)
        throw ContractError("incomplete cell " + describe(key));
    return view;
}

}  // namespace attnsense
