#ifndef ATTNSENSE_TRACE_HPP
#define ATTNSENSE_TRACE_HPP

// Trace data model: per-image Gaussian summaries labeled by style cluster,
// image, layer, timestep and projection, plus the line-delimited file format.

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "attnsense/gaussian.hpp"

namespace attnsense {

enum class Projection { key, query, value };

std::string_view to_string(Projection projection);
Projection parse_projection(std::string_view text);  // throws ContractError

struct TraceHeader {
    int schema_version = 1;
    int layers = 0;  // L
    int t_max = 0;
    int dim = 0;     // d
    int styles = 0;  // m
    int images = 0;  // n per style
    std::vector<Projection> projections;

    bool operator==(const TraceHeader&) const = default;
};

struct TraceRecord {
    std::string collection_id;
    std::string style_id;
    int image_index = 0;
    int layer_id = 0;
    int timestep = 0;
    Projection projection = Projection::key;
    GaussianSummary summary;

    bool operator==(const TraceRecord&) const = default;
};

struct TraceSet {
    TraceHeader header;
    std::vector<TraceRecord> records;

    bool operator==(const TraceSet&) const = default;
};

struct CellKey {
    int layer_id = 0;
    int timestep = 0;
    Projection projection = Projection::key;

    auto operator<=>(const CellKey&) const = default;
};

enum class Severity { warning, error };

struct ValidationIssue {
    Severity severity = Severity::error;
    std::string location;
    std::string message;

    auto operator<=>(const ValidationIssue&) const = default;
};

struct ValidationReport {
    bool ok = true;
    std::vector<ValidationIssue> issues;  // sorted
};

/// The m clusters of one (layer, timestep, projection) cell, ordered by
/// style_id, each holding its n summaries ordered by image_index.
struct CellView {
    CellKey key;
    std::vector<std::string> style_ids;
    std::vector<std::vector<GaussianSummary>> clusters;

    std::size_t styles() const { return clusters.size(); }
    std::size_t images() const { return clusters.empty() ? 0 : clusters.front().size(); }
    bool operator==(const CellView&) const = default;
};

TraceSet parse_traces(std::string_view text);
std::string format_traces(const TraceSet& set);

TraceSet read_traces(const std::filesystem::path& path);
void write_traces(const TraceSet& set, const std::filesystem::path& path);

ValidationReport validate(const TraceSet& set);

/// Record indices per cell, each list sorted by (style_id, image_index).
std::map<CellKey, std::vector<std::size_t>> index_cells(const TraceSet& set);

CellView make_cell_view(const TraceSet& set, const CellKey& key, const std::vector<std::size_t>& indices);
CellView group_by_cell(const TraceSet& set, int layer_id, int timestep, Projection projection);

/// Canonical record order: style_id, image_index, layer_id, timestep, projection.
void sort_records(std::vector<TraceRecord>& records);

}  // namespace attnsense

#endif  // ATTNSENSE_TRACE_HPP
