#include "attnsense/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "attnsense/errors.hpp"
#include "attnsense/philox.hpp"
#include "attnsense/text_format.hpp"

namespace attnsense {

double synth_normal(std::uint64_t seed, SynthStream stream, int style, int image, int layer, int timestep,
                    Projection projection, int channel) {
    const Philox4x32 gen({static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    const Philox4x32::Counter ctr{
        static_cast<std::uint32_t>(channel) / 2u,
        static_cast<std::uint32_t>(timestep),
        (static_cast<std::uint32_t>(layer) << 8) | (static_cast<std::uint32_t>(projection) << 4) |
            static_cast<std::uint32_t>(stream),
        (static_cast<std::uint32_t>(style) << 16) | static_cast<std::uint32_t>(image),
    };
    return box_muller(gen(ctr))[static_cast<std::size_t>(channel % 2)];
}

void validate_config(const SynthConfig& cfg) {
    if (cfg.styles < 1 || cfg.styles >= (1 << 16)) throw ContractError("synth: m must lie in [1, 65535]");
    if (cfg.images < 1 || cfg.images >= (1 << 16)) throw ContractError("synth: n must lie in [1, 65535]");
    if (cfg.layers < 1 || cfg.layers >= (1 << 24)) throw ContractError("synth: L must lie in [1, 2^24)");
    if (cfg.dim < 1) throw ContractError("synth: d must be positive");
    if (cfg.timesteps.empty()) throw ContractError("synth: no timesteps");
    std::set<int> unique(cfg.timesteps.begin(), cfg.timesteps.end());
    if (unique.size() != cfg.timesteps.size() || *unique.begin() < 0)
        throw ContractError("synth: timesteps must be distinct and nonnegative");
    if (cfg.projections.empty()) throw ContractError("synth: no projections");
    if (!(cfg.base_sigma > 0.0) || !std::isfinite(cfg.base_sigma)) throw ContractError("synth: base_sigma must be positive");
    if (!(cfg.sigma_jitter >= 0.0) || !(cfg.intra_spread >= 0.0))
        throw ContractError("synth: sigma_jitter and intra_spread must be nonnegative");
    for (const auto& [layer, separation] : cfg.planted) {
        if (layer < 0 || layer >= cfg.layers) throw ContractError("synth: planted layer " + std::to_string(layer) + " outside [0, L)");
        if (!(separation >= 0.0) || !std::isfinite(separation)) throw ContractError("synth: separation must be >= 0");
    }
}

std::string style_label(int style) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "style%05d", style);
    return buffer;
}

namespace {

TraceSet generate(const SynthConfig& cfg, const std::map<int, double>& planted) {
    validate_config(cfg);
    TraceSet set;
    set.header.layers = cfg.layers;
    set.header.t_max = *std::max_element(cfg.timesteps.begin(), cfg.timesteps.end());
    set.header.dim = cfg.dim;
    set.header.styles = cfg.styles;
    set.header.images = cfg.images;
    std::set<Projection> projections(cfg.projections.begin(), cfg.projections.end());
    set.header.projections.assign(projections.begin(), projections.end());

    std::vector<int> timesteps = cfg.timesteps;
    std::sort(timesteps.begin(), timesteps.end());
    set.records.reserve(static_cast<std::size_t>(cfg.styles) * cfg.images * cfg.layers * timesteps.size() *
                        projections.size());

    const double b = cfg.base_sigma;
    for (int s = 0; s < cfg.styles; ++s) {
        const std::string style_id = style_label(s);
        for (int i = 0; i < cfg.images; ++i) {
            for (int l = 0; l < cfg.layers; ++l) {
                const auto it = planted.find(l);
                const double separation = it == planted.end() ? 0.0 : it->second;
                for (int t : timesteps) {
                    for (Projection p : projections) {
                        TraceRecord r;
                        r.collection_id = cfg.collection_id;
                        r.style_id = style_id;
                        r.image_index = i;
                        r.layer_id = l;
                        r.timestep = t;
                        r.projection = p;
                        Eigen::VectorXd mu(cfg.dim), sigma(cfg.dim);
                        for (int c = 0; c < cfg.dim; ++c) {
                            const double center = synth_normal(cfg.seed, SynthStream::center, 0, 0, l, t, p, c);
                            const double offset =
                                separation > 0.0 ? synth_normal(cfg.seed, SynthStream::offset, s, 0, l, t, p, c) : 0.0;
                            const double eps = synth_normal(cfg.seed, SynthStream::mu_noise, s, i, l, t, p, c);
                            const double eta = synth_normal(cfg.seed, SynthStream::sigma_noise, s, i, l, t, p, c);
                            mu[c] = center + b * (separation * offset + cfg.intra_spread * eps);
                            sigma[c] = b * std::abs(1.0 + cfg.sigma_jitter * eta);
                        }
                        r.summary = GaussianSummary(std::move(mu), std::move(sigma));
                        set.records.push_back(std::move(r));
                    }
                }
            }
        }
    }
    return set;
}

}  // namespace

PlantedSet generate_planted(const SynthConfig& cfg) {
    PlantedSet out{generate(cfg, cfg.planted), {}};
    for (const auto& [layer, separation] : cfg.planted) {
        out.truth.sensitive_layers.insert(layer);
        out.truth.separations.emplace(layer, separation);
    }
    return out;
}

TraceSet generate_null(const SynthConfig& cfg) { return generate(cfg, {}); }

namespace {

Json planted_json(const std::map<int, double>& planted) {
    Json out = Json::array();
    for (const auto& [layer, separation] : planted) {
        Json entry;
        entry["layer_id"] = layer;
        entry["separation"] = separation;
        out.push_back(entry);
    }
    return out;
}

std::map<int, double> parse_planted(const Json& obj, std::size_t line) {
    const Json& list = obj.at("planted");
    if (!list.is_array()) throw ParseError(line, "field 'planted' must be an array");
    std::map<int, double> planted;
    for (const auto& entry : list) {
        if (!entry.is_object()) throw ParseError(line, "planted entries must be objects");
        check_members(entry, {"layer_id", "separation"}, {}, line, "planted");
        const int layer = member<int>(entry, "layer_id", line);
        if (!planted.emplace(layer, member<double>(entry, "separation", line)).second)
            throw SchemaError(line, "layer " + std::to_string(layer) + " planted twice");
    }
    return planted;
}

Json parse_single_object(std::string_view text) {
    Json obj;
    try {
        obj = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(0, std::string("malformed object: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(0, "expected an object");
    return obj;
}

}  // namespace

SynthConfig parse_synth_config(std::string_view text) {
    const Json obj = parse_single_object(text);
    check_members(obj, {"m", "n", "L", "timesteps", "d", "seed"},
                  {"planted", "base_sigma", "sigma_jitter", "intra_spread", "projections", "collection_id"}, 0,
                  "synth config");
    SynthConfig cfg;
    cfg.styles = member<int>(obj, "m", 0);
    cfg.images = member<int>(obj, "n", 0);
    cfg.layers = member<int>(obj, "L", 0);
    cfg.timesteps = member<std::vector<int>>(obj, "timesteps", 0);
    cfg.dim = member<int>(obj, "d", 0);
    cfg.seed = member<std::uint64_t>(obj, "seed", 0);
    if (obj.contains("planted")) cfg.planted = parse_planted(obj, 0);
    if (obj.contains("base_sigma")) cfg.base_sigma = member<double>(obj, "base_sigma", 0);
    if (obj.contains("sigma_jitter")) cfg.sigma_jitter = member<double>(obj, "sigma_jitter", 0);
    if (obj.contains("intra_spread")) cfg.intra_spread = member<double>(obj, "intra_spread", 0);
    if (obj.contains("collection_id")) cfg.collection_id = member<std::string>(obj, "collection_id", 0);
    if (obj.contains("projections")) {
        cfg.projections.clear();
        try {
            for (const auto& p : member<std::vector<std::string>>(obj, "projections", 0))
                cfg.projections.push_back(parse_projection(p));
        } catch (const ContractError& e) {
            throw SchemaError(0, e.what());
        }
    }
    try {
        validate_config(cfg);
    } catch (const ContractError& e) {
        throw SchemaError(0, e.what());
    }
    return cfg;
}

std::string format_synth_config(const SynthConfig& cfg) {
    Json obj;
    obj["m"] = cfg.styles;
    obj["n"] = cfg.images;
    obj["L"] = cfg.layers;
    obj["timesteps"] = cfg.timesteps;
    obj["d"] = cfg.dim;
    obj["seed"] = cfg.seed;
    obj["planted"] = planted_json(cfg.planted);
    obj["base_sigma"] = cfg.base_sigma;
    obj["sigma_jitter"] = cfg.sigma_jitter;
    obj["intra_spread"] = cfg.intra_spread;
    obj["projections"] = Json::array();
    for (auto p : cfg.projections) obj["projections"].push_back(std::string(to_string(p)));
    obj["collection_id"] = cfg.collection_id;
    return obj.dump(2) + '\n';
}

SynthConfig read_synth_config(const std::filesystem::path& path) { return parse_synth_config(read_file(path)); }

std::string format_ground_truth(const GroundTruth& truth) {
    Json obj;
    obj["schema_version"] = 1;
    obj["kind"] = "ground_truth";
    obj["planted"] = planted_json(truth.separations);
    return obj.dump() + '\n';
}

GroundTruth parse_ground_truth(std::string_view text) {
    const Json obj = parse_single_object(text);
    check_members(obj, {"schema_version", "kind", "planted"}, {}, 0, "ground truth");
    if (member<int>(obj, "schema_version", 0) != 1) throw SchemaError(0, "unsupported schema_version");
    if (member<std::string>(obj, "kind", 0) != "ground_truth") throw SchemaError(0, "not a ground-truth file");
    GroundTruth truth;
    truth.separations = parse_planted(obj, 0);
    for (const auto& [layer, separation] : truth.separations) truth.sensitive_layers.insert(layer);
    return truth;
}

void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
    write_file(path, format_ground_truth(truth));
}

GroundTruth read_ground_truth(const std::filesystem::path& path) { return parse_ground_truth(read_file(path)); }

}  // namespace attnsense
