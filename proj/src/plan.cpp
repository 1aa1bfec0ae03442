#include "attnsense/plan.hpp"

#include <algorithm>
#include <set>

#include "attnsense/text_format.hpp"

namespace attnsense {

namespace {

constexpr int kPlanSchemaVersion = 1;

void require_unit(double value, std::string_view name) {
    if (!(value >= 0.0 && value <= 1.0)) throw ContractError(std::string(name) + " must lie in [0, 1]");
}

void require_subset(const std::vector<int>& layers, int count, std::string_view what) {
    std::set<int> unique;
    for (int l : layers) {
        if (l < 0 || l >= count) throw ContractError(std::string(what) + ": layer " + std::to_string(l) + " out of range");
        if (!unique.insert(l).second) throw ContractError(std::string(what) + ": layer " + std::to_string(l) + " repeated");
    }
}

std::set<int> as_set(const std::vector<int>& layers) { return {layers.begin(), layers.end()}; }

void validate_plan(const ConditioningPlan& plan) {
    if (plan.schema_version != kPlanSchemaVersion) throw ContractError("unsupported plan schema_version");
    if (plan.layers < 0) throw ContractError("plan L must be nonnegative");
    validate_scheduler(plan.scheduler);
    const auto& style = plan.style;
    require_unit(style.lambda_s, "lambda_s");
    const int k = subset_size(style.lambda_s, plan.layers);
    require_subset(style.layers, plan.layers, "style.layers");
    if (static_cast<int>(style.layers.size()) != k)
        throw ContractError("style.layers holds " + std::to_string(style.layers.size()) + " layers, lambda_s implies " +
                            std::to_string(k));
    for (const auto& [t, subset] : style.per_timestep_overrides) {
        if (t < plan.scheduler.t_end || t > plan.scheduler.t_start)
            throw ContractError("override timestep " + std::to_string(t) + " outside the scheduler range");
        require_subset(subset, plan.layers, "per_timestep_overrides");
        if (static_cast<int>(subset.size()) != k) throw ContractError("override subset size differs from K");
    }
    const auto& s = plan.structure;
    require_unit(s.lambda_t, "lambda_t");
    require_unit(s.knobs.lambda_scale, "lambda_scale");
    require_unit(s.knobs.lambda_mid, "lambda_mid");
    require_unit(s.knobs.lambda_down, "lambda_down");
    require_unit(s.knobs.lambda_convs, "lambda_convs");
    if (s.up_cutoff_timestep != build_structure_plan(s.lambda_t, plan.scheduler, s.knobs).up_cutoff_timestep)
        throw ContractError("up_cutoff_timestep disagrees with lambda_t and the scheduler");
}

}  // namespace

void validate_scheduler(const SchedulerSpec& scheduler) {
    if (!(scheduler.t_start > scheduler.t_end && scheduler.t_end >= 0))
        throw ContractError("scheduler requires t_start > t_end >= 0");
    if (scheduler.num_steps < 1) throw ContractError("scheduler requires num_steps >= 1");
}

StyleSection build_style_plan(const LayerRanking& ranking, double lambda_s, const SchedulerSpec& scheduler,
                              bool per_timestep, std::span<const LayerRanking> timestep_rankings) {
    validate_scheduler(scheduler);
    require_unit(lambda_s, "lambda_s");
    StyleSection style;
    style.lambda_s = lambda_s;
    style.layers = select_top_k(ranking, lambda_s, ranking.layers);
    if (!per_timestep) return style;

    if (timestep_rankings.empty()) throw ContractError("per-timestep style plan requested without per-timestep rankings");
    const std::set<int> base = as_set(style.layers);
    for (const auto& r : timestep_rankings) {
        if (r.scope.kind != RankingScope::Kind::per_timestep)
            throw ContractError("per-timestep style plan needs per-timestep rankings");
        if (r.layers != ranking.layers) throw ContractError("per-timestep ranking differs in L");
        if (r.scope.timestep < scheduler.t_end || r.scope.timestep > scheduler.t_start)
            throw ContractError("ranking timestep " + std::to_string(r.scope.timestep) + " outside the scheduler range");
        if (style.per_timestep_overrides.count(r.scope.timestep))
            throw ContractError("two rankings for timestep " + std::to_string(r.scope.timestep));
        auto subset = select_top_k(r, lambda_s, r.layers);
        if (as_set(subset) != base) style.per_timestep_overrides.emplace(r.scope.timestep, std::move(subset));
    }
    return style;
}

StructureSection build_structure_plan(double lambda_t, const SchedulerSpec& scheduler, const StructureKnobs& knobs) {
    validate_scheduler(scheduler);
    require_unit(lambda_t, "lambda_t");
    require_unit(knobs.lambda_scale, "lambda_scale");
    require_unit(knobs.lambda_mid, "lambda_mid");
    require_unit(knobs.lambda_down, "lambda_down");
    require_unit(knobs.lambda_convs, "lambda_convs");
    StructureSection section;
    section.lambda_t = lambda_t;
    section.up_cutoff_timestep = scheduler.t_start - subset_size(lambda_t, scheduler.t_start - scheduler.t_end);
    section.knobs = knobs;
    return section;
}

ConditioningPlan make_plan(int layers, const SchedulerSpec& scheduler, StyleSection style, StructureSection structure,
                           std::string provenance) {
    ConditioningPlan plan;
    plan.layers = layers;
    plan.provenance = std::move(provenance);
    plan.scheduler = scheduler;
    plan.style = std::move(style);
    plan.structure = structure;
    validate_plan(plan);
    return plan;
}

LayerMask mask_for(const ConditioningPlan& plan, int layer, int timestep) {
    if (layer < 0 || layer >= plan.layers) throw LookupError("layer " + std::to_string(layer) + " outside the plan");
    if (timestep < plan.scheduler.t_end || timestep > plan.scheduler.t_start)
        throw LookupError("timestep " + std::to_string(timestep) + " outside the scheduler range");
    const auto override_it = plan.style.per_timestep_overrides.find(timestep);
    const auto& active = override_it != plan.style.per_timestep_overrides.end() ? override_it->second : plan.style.layers;
    const auto& knobs = plan.structure.knobs;
    LayerMask mask;
    mask.style_on = std::find(active.begin(), active.end(), layer) != active.end();
    mask.structure_up_on = timestep > plan.structure.up_cutoff_timestep;
    mask.mid_scale = knobs.lambda_mid;
    mask.conv_scale = knobs.lambda_convs;
    mask.down_scale = knobs.lambda_down;
    mask.global_scale = knobs.lambda_scale;
    return mask;
}

std::string format_plan(const ConditioningPlan& plan) {
    validate_plan(plan);
    Json obj;
    obj["schema_version"] = plan.schema_version;
    obj["L"] = plan.layers;
    obj["provenance"] = plan.provenance;
    Json scheduler;
    scheduler["t_start"] = plan.scheduler.t_start;
    scheduler["t_end"] = plan.scheduler.t_end;
    scheduler["num_steps"] = plan.scheduler.num_steps;
    scheduler["direction"] = "descending";
    obj["scheduler"] = scheduler;
    Json style;
    style["lambda_s"] = plan.style.lambda_s;
    style["layers"] = plan.style.layers;
    style["per_timestep_overrides"] = Json::array();
    for (const auto& [t, subset] : plan.style.per_timestep_overrides) {
        Json entry;
        entry["timestep"] = t;
        entry["layers"] = subset;
        style["per_timestep_overrides"].push_back(entry);
    }
    obj["style"] = style;
    const auto& s = plan.structure;
    Json structure;
    structure["lambda_t"] = s.lambda_t;
    structure["up_cutoff_timestep"] = s.up_cutoff_timestep;
    structure["lambda_scale"] = s.knobs.lambda_scale;
    structure["lambda_mid"] = s.knobs.lambda_mid;
    structure["lambda_down"] = s.knobs.lambda_down;
    structure["lambda_convs"] = s.knobs.lambda_convs;
    obj["structure"] = structure;
    return obj.dump(2) + '\n';
}

namespace {

const Json& object_member(const Json& obj, const char* name) {
    const Json& v = obj.at(name);
    if (!v.is_object()) throw ParseError(0, std::string("field '") + name + "' must be an object");
    return v;
}

}  // namespace

ConditioningPlan parse_plan(std::string_view text) {
    Json obj;
    try {
        obj = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(0, std::string("malformed plan: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(0, "plan must be an object");
    check_members(obj, {"schema_version", "L", "provenance", "scheduler", "style", "structure"}, {}, 0, "plan");
    ConditioningPlan plan;
    plan.schema_version = member<int>(obj, "schema_version", 0);
    if (plan.schema_version != kPlanSchemaVersion)
        throw SchemaError(0, "unsupported plan schema_version " + std::to_string(plan.schema_version));
    plan.layers = member<int>(obj, "L", 0);
    plan.provenance = member<std::string>(obj, "provenance", 0);

    const Json& scheduler = object_member(obj, "scheduler");
    check_members(scheduler, {"t_start", "t_end", "num_steps", "direction"}, {}, 0, "scheduler");
    plan.scheduler.t_start = member<int>(scheduler, "t_start", 0);
    plan.scheduler.t_end = member<int>(scheduler, "t_end", 0);
    plan.scheduler.num_steps = member<int>(scheduler, "num_steps", 0);
    if (member<std::string>(scheduler, "direction", 0) != "descending")
        throw SchemaError(0, "scheduler direction must be 'descending'");

    const Json& style = object_member(obj, "style");
    check_members(style, {"lambda_s", "layers", "per_timestep_overrides"}, {}, 0, "style");
    plan.style.lambda_s = member<double>(style, "lambda_s", 0);
    plan.style.layers = member<std::vector<int>>(style, "layers", 0);
    const Json& overrides = style.at("per_timestep_overrides");
    if (!overrides.is_array()) throw ParseError(0, "field 'per_timestep_overrides' must be an array");
    for (const auto& entry : overrides) {
        if (!entry.is_object()) throw ParseError(0, "override entries must be objects");
        check_members(entry, {"timestep", "layers"}, {}, 0, "per_timestep_overrides");
        const int t = member<int>(entry, "timestep", 0);
        if (!plan.style.per_timestep_overrides.emplace(t, member<std::vector<int>>(entry, "layers", 0)).second)
            throw SchemaError(0, "duplicate override for timestep " + std::to_string(t));
    }

    const Json& structure = object_member(obj, "structure");
    check_members(structure,
                  {"lambda_t", "up_cutoff_timestep", "lambda_scale", "lambda_mid", "lambda_down", "lambda_convs"}, {}, 0,
                  "structure");
    plan.structure.lambda_t = member<double>(structure, "lambda_t", 0);
    plan.structure.up_cutoff_timestep = member<int>(structure, "up_cutoff_timestep", 0);
    plan.structure.knobs.lambda_scale = member<double>(structure, "lambda_scale", 0);
    plan.structure.knobs.lambda_mid = member<double>(structure, "lambda_mid", 0);
    plan.structure.knobs.lambda_down = member<double>(structure, "lambda_down", 0);
    plan.structure.knobs.lambda_convs = member<double>(structure, "lambda_convs", 0);

    try {
        validate_plan(plan);
    } catch (const ContractError& e) {
        throw SchemaError(0, e.what());
    }
    return plan;
}

void emit_plan(const ConditioningPlan& plan, const std::filesystem::path& path) { write_file(path, format_plan(plan)); }

ConditioningPlan read_plan(const std::filesystem::path& path) { return parse_plan(read_file(path)); }

}  // namespace attnsense
