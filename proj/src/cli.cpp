#include "attnsense/cli.hpp"

#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "attnsense/errors.hpp"
#include "attnsense/eval.hpp"
#include "attnsense/plan.hpp"
#include "attnsense/ranking.hpp"
#include "attnsense/scoring.hpp"
#include "attnsense/synth.hpp"
#include "attnsense/text_format.hpp"
#include "attnsense/trace.hpp"

namespace attnsense::cli {

namespace {

struct Options {
    // validate / analyze
    std::string traces;
    std::string output;
    std::string policy = "mean_over_projections";
    unsigned threads = 1;
    double sigma_floor = 1e-6;
    // aggregate / rank
    std::vector<std::string> tables;
    std::optional<int> timestep;
    bool averaged = false;
    std::string projection;
    bool trim_rank_positions = false;
    // plan
    std::string ranking;
    std::vector<std::string> timestep_rankings;
    bool per_timestep = false;
    double lambda_s = 0.0;
    double lambda_t = 0.0;
    std::string scheduler;
    StructureKnobs knobs;
    std::string provenance;
    // synth
    std::string config;
    std::string truth;
    bool null_set = false;
    // eval
    std::string similarity;
    std::string method;
    std::string conditioning;
    std::string prompt_class;
    int k = 0;
};

SchedulerSpec parse_scheduler(const std::string& text) {
    std::vector<long long> parts;
    std::stringstream stream(text);
    std::string token;
    while (std::getline(stream, token, ',')) parts.push_back(parse_integer(token, 0));
    if (parts.size() != 3) throw ContractError("--scheduler expects t_start,t_end,steps");
    SchedulerSpec spec{static_cast<int>(parts[0]), static_cast<int>(parts[1]), static_cast<int>(parts[2])};
    validate_scheduler(spec);
    return spec;
}

void print_error(std::ostream& err, std::string_view kind, std::string_view message) {
    Json line;
    line["error"] = kind;
    line["message"] = message;
    err << line.dump() << '\n';
}

int cmd_validate(const Options& o, std::ostream& out) {
    const TraceSet set = read_traces(o.traces);
    const ValidationReport report = validate(set);
    out << (report.ok ? "ok" : "invalid") << ": " << set.records.size() << " records, " << report.issues.size()
        << " issue(s)\n";
    for (const auto& issue : report.issues)
        out << (issue.severity == Severity::error ? "error" : "warning") << " [" << issue.location << "] "
            << issue.message << '\n';
    return report.ok ? kOk : kContractFailure;
}

int cmd_analyze(const Options& o, std::ostream& out) {
    const TraceSet set = read_traces(o.traces);
    DivergenceConfig cfg;
    cfg.sigma_floor = o.sigma_floor;
    const SensitivityTable table = sensitivity_table(set, cfg, parse_projection_policy(o.policy), o.threads);
    write_table(table, o.output);
    std::size_t degenerate = 0;
    for (const auto& [key, cell] : table.cells) degenerate += cell.degenerate();
    out << "analyzed " << table.cells.size() << " cells (" << degenerate << " degenerate) -> " << o.output << '\n';
    return kOk;
}

int cmd_aggregate(const Options& o, std::ostream& out) {
    std::vector<SensitivityTable> tables;
    for (const auto& path : o.tables) tables.push_back(read_table(path));
    write_table(trimmed_aggregate(tables), o.output);
    out << "aggregated " << tables.size() << " tables -> " << o.output << '\n';
    return kOk;
}

int cmd_rank(const Options& o, std::ostream& out) {
    const RankingScope scope = o.timestep ? RankingScope::at_timestep(*o.timestep) : RankingScope::averaged();
    std::optional<Projection> projection;
    if (!o.projection.empty()) projection = parse_projection(o.projection);
    if (o.tables.size() > 1 && !o.trim_rank_positions)
        throw ContractError("rank takes one table; aggregate first or pass --trim-rank-positions");
    std::vector<LayerRanking> rankings;
    for (const auto& path : o.tables) rankings.push_back(rank_layers(read_table(path), scope, projection));
    const LayerRanking ranking = rankings.size() == 1 ? rankings.front() : trimmed_rank_positions(rankings);
    write_ranking(ranking, o.output);
    out << "ranked " << ranking.layers << " layers";
    if (!ranking.order.empty()) out << ", most sensitive: " << ranking.order.front();
    out << " -> " << o.output << '\n';
    return kOk;
}

int cmd_plan(const Options& o, std::ostream& out) {
    const SchedulerSpec scheduler = parse_scheduler(o.scheduler);
    const LayerRanking ranking = read_ranking(o.ranking);
    std::vector<LayerRanking> per_t;
    for (const auto& path : o.timestep_rankings) per_t.push_back(read_ranking(path));
    StyleSection style = build_style_plan(ranking, o.lambda_s, scheduler, o.per_timestep, per_t);
    const StructureSection structure = build_structure_plan(o.lambda_t, scheduler, o.knobs);
    const ConditioningPlan plan = make_plan(ranking.layers, scheduler, std::move(style), structure, o.provenance);
    emit_plan(plan, o.output);
    out << "plan: " << plan.style.layers.size() << " of " << plan.layers << " style layers, "
        << plan.style.per_timestep_overrides.size() << " timestep override(s), up cutoff at t="
        << plan.structure.up_cutoff_timestep << " -> " << o.output << '\n';
    return kOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
    const SynthConfig cfg = read_synth_config(o.config);
    PlantedSet result;
    if (o.null_set) result.traces = generate_null(cfg);
    else result = generate_planted(cfg);
    write_traces(result.traces, o.output);
    if (!o.truth.empty()) write_ground_truth(result.truth, o.truth);
    out << "generated " << result.traces.records.size() << " records, " << result.truth.sensitive_layers.size()
        << " planted layer(s) -> " << o.output << '\n';
    return kOk;
}

int cmd_eval_curve(const Options& o, std::ostream& out) {
    const auto records = read_similarity_table(o.similarity);
    SimilarityFilter filter;
    if (!o.method.empty()) filter.method_tag = o.method;
    if (!o.conditioning.empty()) filter.conditioning = parse_conditioning(o.conditioning);
    if (!o.prompt_class.empty()) filter.prompt_class = parse_prompt_class(o.prompt_class);
    const TradeoffCurve curve = tradeoff_curve(records, filter);
    write_curve(curve, o.output);
    out << "curve with " << curve.points.size() << " point(s) -> " << o.output << '\n';
    return kOk;
}

int cmd_eval_recovery(const Options& o, std::ostream& out) {
    const LayerRanking ranking = read_ranking(o.ranking);
    const GroundTruth truth = read_ground_truth(o.truth);
    const RecoveryMetrics m = recovery_metrics(ranking, truth, o.k);
    out << "precision_at_k " << format_real(m.precision_at_k) << "\nmean_rank_of_planted "
        << format_real(m.mean_rank_of_planted) << '\n';
    if (!o.output.empty()) {
        Json obj;
        obj["k"] = o.k;
        obj["precision_at_k"] = m.precision_at_k;
        obj["mean_rank_of_planted"] = m.mean_rank_of_planted;
        write_file(o.output, obj.dump() + '\n');
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Layer sensitivity analysis and conditioning-plan compiler", "attnsense"};
    app.require_subcommand(1);

    auto* validate_cmd = app.add_subcommand("validate", "Check a trace file");
    validate_cmd->add_option("traces", o.traces, "Trace file")->required();

    auto* analyze = app.add_subcommand("analyze", "Score every (layer, timestep) cell");
    analyze->add_option("traces", o.traces, "Trace file")->required();
    analyze->add_option("-o,--output", o.output, "Sensitivity table")->required();
    analyze->add_option("--projection-policy", o.policy)
        ->check(CLI::IsMember({"per_projection", "mean_over_projections"}));
    analyze->add_option("--threads", o.threads)->check(CLI::Range(1u, 1024u));
    analyze->add_option("--sigma-floor", o.sigma_floor)->check(CLI::PositiveNumber);

    auto* aggregate = app.add_subcommand("aggregate", "Trimmed average of repeated tables");
    aggregate->add_option("tables", o.tables, "Sensitivity tables")->required();
    aggregate->add_option("-o,--output", o.output)->required();

    auto* rank = app.add_subcommand("rank", "Rank layers, most sensitive first");
    rank->add_option("tables", o.tables, "Sensitivity table")->required();
    auto* timestep_opt = rank->add_option("--timestep", o.timestep, "Rank at one timestep");
    auto* averaged_opt = rank->add_flag("--averaged", o.averaged, "Rank by mean score over timesteps (default)");
    timestep_opt->excludes(averaged_opt);
    rank->add_option("--projection", o.projection)->check(CLI::IsMember({"key", "query", "value"}));
    rank->add_flag("--trim-rank-positions", o.trim_rank_positions,
                   "Combine several tables by trimming rank positions instead of scores");
    rank->add_option("-o,--output", o.output)->required();

    auto* plan = app.add_subcommand("plan", "Compile a conditioning plan");
    plan->add_option("--ranking", o.ranking)->required();
    plan->add_option("--lambda-s", o.lambda_s)->required()->check(CLI::Range(0.0, 1.0));
    plan->add_option("--lambda-t", o.lambda_t)->required()->check(CLI::Range(0.0, 1.0));
    plan->add_option("--scheduler", o.scheduler, "t_start,t_end,steps")->required();
    plan->add_option("--scale", o.knobs.lambda_scale)->check(CLI::Range(0.0, 1.0));
    plan->add_option("--mid", o.knobs.lambda_mid)->check(CLI::Range(0.0, 1.0));
    plan->add_option("--down", o.knobs.lambda_down)->check(CLI::Range(0.0, 1.0));
    plan->add_option("--convs", o.knobs.lambda_convs)->check(CLI::Range(0.0, 1.0));
    plan->add_flag("--per-timestep", o.per_timestep, "Add per-timestep style overrides");
    plan->add_option("--timestep-ranking", o.timestep_rankings, "Per-timestep ranking files");
    plan->add_option("--provenance", o.provenance, "Free-text note stored in the plan");
    plan->add_option("-o,--output", o.output)->required();

    auto* synth = app.add_subcommand("synth", "Generate a synthetic trace set");
    synth->add_option("--config", o.config)->required();
    synth->add_option("-o,--output", o.output)->required();
    synth->add_option("--truth", o.truth, "Ground-truth sidecar");
    synth->add_flag("--null", o.null_set, "Ignore planted layers");

    auto* eval = app.add_subcommand("eval", "Tradeoff curves and recovery metrics");
    eval->require_subcommand(1);
    auto* curve = eval->add_subcommand("curve", "Mean similarities per stylized-layer count");
    curve->add_option("similarity", o.similarity, "Similarity table (CSV)")->required();
    curve->add_option("--method", o.method);
    curve->add_option("--conditioning", o.conditioning)->check(CLI::IsMember({"text_only", "canny", "depth"}));
    curve->add_option("--prompt-class", o.prompt_class)->check(CLI::IsMember({"easy", "complex"}));
    curve->add_option("-o,--output", o.output)->required();
    auto* recovery = eval->add_subcommand("recovery", "Precision@k of a ranking against ground truth");
    recovery->add_option("--ranking", o.ranking)->required();
    recovery->add_option("--truth", o.truth)->required();
    recovery->add_option("--k", o.k)->required();
    recovery->add_option("-o,--output", o.output);

    std::vector<std::string> argv_storage{"attnsense"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        print_error(err, "usage", e.what());
        return kIoFailure;
    }

    try {
        if (*validate_cmd) return cmd_validate(o, out);
        if (*analyze) return cmd_analyze(o, out);
        if (*aggregate) return cmd_aggregate(o, out);
        if (*rank) return cmd_rank(o, out);
        if (*plan) return cmd_plan(o, out);
        if (*synth) return cmd_synth(o, out);
        if (*curve) return cmd_eval_curve(o, out);
        if (*recovery) return cmd_eval_recovery(o, out);
    } catch (const SchemaError& e) {
        print_error(err, "schema", e.what());
        return kIoFailure;
    } catch (const ParseError& e) {
        print_error(err, "parse", e.what());
        return kIoFailure;
    } catch (const IoError& e) {
        print_error(err, "io", e.what());
        return kIoFailure;
    } catch (const ValidationError& e) {
        print_error(err, "validation", e.what());
        return kContractFailure;
    } catch (const LookupError& e) {
        print_error(err, "lookup", e.what());
        return kContractFailure;
    } catch (const ContractError& e) {
        print_error(err, "contract", e.what());
        return kContractFailure;
    }
    print_error(err, "usage", "no subcommand");
    return kIoFailure;
}

}  // namespace attnsense::cli
