#ifndef ATTNSENSE_EVAL_HPP
#define ATTNSENSE_EVAL_HPP

// Content/style tradeoff curves from precomputed similarity scores, and
// recovery metrics of a ranking against planted ground truth.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "attnsense/ranking.hpp"
#include "attnsense/synth.hpp"

namespace attnsense {

enum class Conditioning { text_only, canny, depth };
enum class PromptClass { easy, complex };

std::string_view to_string(Conditioning conditioning);
std::string_view to_string(PromptClass prompt_class);
Conditioning parse_conditioning(std::string_view text);
PromptClass parse_prompt_class(std::string_view text);

struct SimilarityRecord {
    std::string image_id;
    std::string method_tag;
    int k_layers = 0;
    Conditioning conditioning = Conditioning::text_only;
    PromptClass prompt_class = PromptClass::easy;
    double content_sim = 0.0;
    double style_sim = 0.0;

    bool operator==(const SimilarityRecord&) const = default;
};

struct SimilarityFilter {
    std::optional<std::string> method_tag;
    std::optional<Conditioning> conditioning;
    std::optional<PromptClass> prompt_class;

    bool operator()(const SimilarityRecord& r) const;
};

struct CurvePoint {
    int k_layers = 0;
    double mean_content = 0.0;
    double mean_style = 0.0;
    std::size_t count = 0;

    bool operator==(const CurvePoint&) const = default;
};

struct TradeoffCurve {
    std::vector<CurvePoint> points;  // ascending k_layers

    bool operator==(const TradeoffCurve&) const = default;
};

TradeoffCurve tradeoff_curve(const std::vector<SimilarityRecord>& records,
                             const std::function<bool(const SimilarityRecord&)>& filter = {});

/// CSV with header
/// image_id,method_tag,k_layers,conditioning,prompt_class,content_sim,style_sim
std::vector<SimilarityRecord> parse_similarity_table(std::string_view text);
std::vector<SimilarityRecord> read_similarity_table(const std::filesystem::path& path);

/// One "k mean_content mean_style count" row per point under a column line.
std::string format_curve(const TradeoffCurve& curve);
void write_curve(const TradeoffCurve& curve, const std::filesystem::path& path);

struct RecoveryMetrics {
    double precision_at_k = 0.0;        // |top-k and planted| / min(k, |planted|)
    double mean_rank_of_planted = 0.0;  // 0-based positions
};

RecoveryMetrics recovery_metrics(const LayerRanking& ranking, const GroundTruth& truth, int k);

}  // namespace attnsense

#endif  // ATTNSENSE_EVAL_HPP
