#include "attnsense/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "attnsense/errors.hpp"
#include "attnsense/text_format.hpp"

namespace attnsense {

std::string_view to_string(Conditioning conditioning) {
    switch (conditioning) {
        case Conditioning::text_only: return "text_only";
        case Conditioning::canny: return "canny";
        case Conditioning::depth: return "depth";
    }
    return "?";
}

std::string_view to_string(PromptClass prompt_class) {
    return prompt_class == PromptClass::easy ? "easy" : "complex";
}

Conditioning parse_conditioning(std::string_view text) {
    if (text == "text_only") return Conditioning::text_only;
    if (text == "canny") return Conditioning::canny;
    if (text == "depth") return Conditioning::depth;
    throw ContractError("unknown conditioning '" + std::string(text) + "'");
}

PromptClass parse_prompt_class(std::string_view text) {
    if (text == "easy") return PromptClass::easy;
    if (text == "complex") return PromptClass::complex;
    throw ContractError("unknown prompt class '" + std::string(text) + "'");
}

bool SimilarityFilter::operator()(const SimilarityRecord& r) const {
    return (!method_tag || r.method_tag == *method_tag) && (!conditioning || r.conditioning == *conditioning) &&
           (!prompt_class || r.prompt_class == *prompt_class);
}

TradeoffCurve tradeoff_curve(const std::vector<SimilarityRecord>& records,
                             const std::function<bool(const SimilarityRecord&)>& filter) {
    struct Sums {
        long double content = 0.0L;
        long double style = 0.0L;
        std::size_t count = 0;
    };
    std::map<int, Sums> groups;
    for (const auto& r : records) {
        if (filter && !filter(r)) continue;
        auto& g = groups[r.k_layers];
        g.content += r.content_sim;
        g.style += r.style_sim;
        ++g.count;
    }
    if (groups.empty()) throw ContractError("tradeoff_curve: no records match the filter");
    TradeoffCurve curve;
    for (const auto& [k, g] : groups)
        curve.points.push_back({k, static_cast<double>(g.content / g.count), static_cast<double>(g.style / g.count), g.count});
    return curve;
}

namespace {

constexpr std::string_view kSimilarityHeader =
    "image_id,method_tag,k_layers,conditioning,prompt_class,content_sim,style_sim";

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

double similarity(std::string_view token, std::size_t line, std::string_view column) {
    const double v = parse_real(token, line);
    if (!std::isfinite(v) || v < -1.0 || v > 1.0)
        throw SchemaError(line, std::string(column) + " must be a finite value in [-1, 1]");
    return v;
}

}  // namespace

std::vector<SimilarityRecord> parse_similarity_table(std::string_view text) {
    auto lines = split_lines(text);
    for (auto& l : lines)
        if (!l.empty() && l.back() == '\r') l.pop_back();
    if (lines.empty() || lines[0] != kSimilarityHeader)
        throw ParseError(1, "expected header '" + std::string(kSimilarityHeader) + "'");
    std::vector<SimilarityRecord> records;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line = i + 1;
        const auto fields = split_csv(lines[i]);
        if (fields.size() != 7) throw ParseError(line, "expected 7 comma-separated fields");
        SimilarityRecord r;
        r.image_id = fields[0];
        r.method_tag = fields[1];
        r.k_layers = static_cast<int>(parse_integer(fields[2], line));
        try {
            r.conditioning = parse_conditioning(fields[3]);
            r.prompt_class = parse_prompt_class(fields[4]);
        } catch (const ContractError& e) {
            throw SchemaError(line, e.what());
        }
        r.content_sim = similarity(fields[5], line, "content_sim");
        r.style_sim = similarity(fields[6], line, "style_sim");
        if (r.k_layers < 0) throw SchemaError(line, "k_layers must be nonnegative");
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<SimilarityRecord> read_similarity_table(const std::filesystem::path& path) {
    return parse_similarity_table(read_file(path));
}

std::string format_curve(const TradeoffCurve& curve) {
    std::string out = "k mean_content mean_style count\n";
    for (const auto& p : curve.points)
        out += std::to_string(p.k_layers) + ' ' + format_real(p.mean_content) + ' ' + format_real(p.mean_style) + ' ' +
               std::to_string(p.count) + '\n';
    return out;
}

void write_curve(const TradeoffCurve& curve, const std::filesystem::path& path) { write_file(path, format_curve(curve)); }

RecoveryMetrics recovery_metrics(const LayerRanking& ranking, const GroundTruth& truth, int k) {
    if (k < 0 || k > ranking.layers) throw ContractError("recovery_metrics: k must lie in [0, L]");
    for (int layer : truth.sensitive_layers)
        if (layer < 0 || layer >= ranking.layers) throw ContractError("recovery_metrics: planted layer outside the ranking");
    RecoveryMetrics metrics;
    const std::size_t denominator = std::min<std::size_t>(static_cast<std::size_t>(k), truth.sensitive_layers.size());
    if (denominator > 0) {
        std::size_t hits = 0;
        for (int i = 0; i < k; ++i) hits += truth.sensitive_layers.count(ranking.order[i]);
        metrics.precision_at_k = static_cast<double>(hits) / static_cast<double>(denominator);
    }
    if (!truth.sensitive_layers.empty()) {
        const auto positions = ranking.positions();
        long double sum = 0.0L;
        for (int layer : truth.sensitive_layers) sum += positions[layer];
        metrics.mean_rank_of_planted = static_cast<double>(sum / truth.sensitive_layers.size());
    }
    return metrics;
}

}  // namespace attnsense
