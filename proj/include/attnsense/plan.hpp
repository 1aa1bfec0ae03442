#ifndef ATTNSENSE_PLAN_HPP
#define ATTNSENSE_PLAN_HPP

// Conditioning plans: which layers receive style conditioning at each
// timestep, and until when structure conditioning feeds the Up layers.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnsense/ranking.hpp"

namespace attnsense {

/// Diffusion timesteps run from t_start down to t_end during generation.
struct SchedulerSpec {
    int t_start = 1000;
    int t_end = 0;
    int num_steps = 50;

    bool operator==(const SchedulerSpec&) const = default;
};

void validate_scheduler(const SchedulerSpec& scheduler);

struct StructureKnobs {
    double lambda_scale = 1.0;
    double lambda_mid = 1.0;
    double lambda_down = 1.0;
    double lambda_convs = 1.0;

    bool operator==(const StructureKnobs&) const = default;
};

struct StyleSection {
    double lambda_s = 0.0;
    std::vector<int> layers;  // ranking prefix, most sensitive first
    std::map<int, std::vector<int>> per_timestep_overrides;

    bool operator==(const StyleSection&) const = default;
};

struct StructureSection {
    double lambda_t = 0.0;
    int up_cutoff_timestep = 0;
    StructureKnobs knobs;

    bool operator==(const StructureSection&) const = default;
};

struct ConditioningPlan {
    int schema_version = 1;
    int layers = 0;
    std::string provenance;  // free text, e.g. how layer groups map to ids
    SchedulerSpec scheduler;
    StyleSection style;
    StructureSection structure;

    bool operator==(const ConditioningPlan&) const = default;
};

/// Style layers are the top round-half-up(lambda_s * L) of `ranking`. With
/// `per_timestep`, every timestep ranking whose subset differs (as a set)
/// from the main one becomes an override.
StyleSection build_style_plan(const LayerRanking& ranking, double lambda_s, const SchedulerSpec& scheduler,
                              bool per_timestep = false, std::span<const LayerRanking> timestep_rankings = {});

/// Cutoff = t_start - round(lambda_t * (t_start - t_end)); Up-layer structure
/// conditioning is active for timesteps strictly above it.
StructureSection build_structure_plan(double lambda_t, const SchedulerSpec& scheduler, const StructureKnobs& knobs = {});

ConditioningPlan make_plan(int layers, const SchedulerSpec& scheduler, StyleSection style, StructureSection structure,
                           std::string provenance = {});

struct LayerMask {
    bool style_on = false;
    bool structure_up_on = false;
    double mid_scale = 1.0;
    double conv_scale = 1.0;
    double down_scale = 1.0;
    double global_scale = 1.0;

    bool operator==(const LayerMask&) const = default;
};

LayerMask mask_for(const ConditioningPlan& plan, int layer, int timestep);

std::string format_plan(const ConditioningPlan& plan);
ConditioningPlan parse_plan(std::string_view text);
void emit_plan(const ConditioningPlan& plan, const std::filesystem::path& path);
ConditioningPlan read_plan(const std::filesystem::path& path);

}  // namespace attnsense

#endif  // ATTNSENSE_PLAN_HPP
