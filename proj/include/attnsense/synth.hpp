#ifndef ATTNSENSE_SYNTH_HPP
#define ATTNSENSE_SYNTH_HPP

// Synthetic trace sets with planted style-sensitive layers.
//
// For channel c of (style s, image i, layer l, timestep t, projection p):
//   mu    = center[l,t,p,c] + base_sigma * (sep_l * offset[s,l,t,p,c] + intra_spread * eps[s,i,l,t,p,c])
//   sigma = base_sigma * |1 + sigma_jitter * eta[s,i,l,t,p,c]|
// where center, offset, eps, eta are standard normals and sep_l is the
// planted separation of layer l (0 for unplanted layers). Every draw is a
// pure function of (seed, coordinates), so output is independent of
// generation order.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "attnsense/trace.hpp"

namespace attnsense {

struct SynthConfig {
    int styles = 10;   // m
    int images = 5;    // n
    int layers = 70;   // L
    std::vector<int> timesteps{0};
    int dim = 32;      // d
    std::uint64_t seed = 0;
    std::map<int, double> planted;  // layer_id -> separation in base_sigma units
    double base_sigma = 1.0;
    double sigma_jitter = 0.05;
    double intra_spread = 0.1;
    std::vector<Projection> projections{Projection::key};
    std::string collection_id = "synth";

    bool operator==(const SynthConfig&) const = default;
};

struct GroundTruth {
    std::set<int> sensitive_layers;
    std::map<int, double> separations;

    bool operator==(const GroundTruth&) const = default;
};

struct PlantedSet {
    TraceSet traces;
    GroundTruth truth;
};

enum class SynthStream : std::uint32_t { center = 1, offset = 2, mu_noise = 3, sigma_noise = 4 };

/// The standard normal drawn for one coordinate tuple.
double synth_normal(std::uint64_t seed, SynthStream stream, int style, int image, int layer, int timestep,
                    Projection projection, int channel);

void validate_config(const SynthConfig& cfg);

PlantedSet generate_planted(const SynthConfig& cfg);

/// Same generator with no planted layers.
TraceSet generate_null(const SynthConfig& cfg);

std::string style_label(int style);

SynthConfig parse_synth_config(std::string_view text);
std::string format_synth_config(const SynthConfig& cfg);
SynthConfig read_synth_config(const std::filesystem::path& path);

std::string format_ground_truth(const GroundTruth& truth);
GroundTruth parse_ground_truth(std::string_view text);
void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth read_ground_truth(const std::filesystem::path& path);

}  // namespace attnsense

#endif  // ATTNSENSE_SYNTH_HPP
