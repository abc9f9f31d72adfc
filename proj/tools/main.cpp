// Command-line front end: gen / match / fuse / eval / run / import.
// Exit codes: 0 success, 2 configuration or usage error, 3 data error,
// 4 unattainable operating point under --strict.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"

#include "phalanx/phalanx.hpp"

namespace fs = std::filesystem;
using namespace phalanx;

namespace {

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        out.push_back(text.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

std::vector<Finger> parse_fingers(const std::string& text) {
    std::vector<Finger> out;
    for (const std::string& tok : split_csv(text)) out.push_back(finger_from_string(tok));
    return out;
}

std::vector<Phalanx> parse_phalanges(const std::string& text) {
    std::vector<Phalanx> out;
    for (const std::string& tok : split_csv(text)) {
        int n = 0;
        try {
            n = std::stoi(tok);
        } catch (const std::exception&) {
            throw ConfigError("bad phalanx number: " + tok);
        }
        out.push_back(phalanx_from_number(n));
    }
    return out;
}

std::map<Phalanx, double> parse_weights(const std::string& text) {
    std::map<Phalanx, double> out;
    for (const std::string& tok : split_csv(text)) {
        std::size_t eq = tok.find('=');
        if (eq == std::string::npos) throw ConfigError("weights need phalanx=value: " + tok);
        try {
            out[phalanx_from_number(std::stoi(tok.substr(0, eq)))] =
                std::stod(tok.substr(eq + 1));
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("bad weight entry: " + tok);
        }
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& text) {
    std::vector<double> out;
    for (const std::string& tok : split_csv(text)) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError("bad number: " + tok);
        }
    }
    return out;
}

double round6(double x) { return std::round(x * 1e6) / 1e6; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

// Concatenates score tables (e.g. one CSV per phalanx) into one, re-interning
// template ids so record references stay valid.
ScoreTable merge_tables(std::vector<ScoreTable> parts) {
    if (parts.size() == 1) return std::move(parts.front());
    ScoreTable out;
    std::unordered_map<std::string, std::uint32_t> index;
    for (ScoreTable& part : parts) {
        std::vector<std::uint32_t> remap(part.ids.size());
        for (std::size_t i = 0; i < part.ids.size(); ++i) {
            auto [it, inserted] =
                index.emplace(part.ids[i], static_cast<std::uint32_t>(out.ids.size()));
            if (inserted) out.ids.push_back(part.ids[i]);
            remap[i] = it->second;
        }
        for (ScoreRecord r : part.records) {
            r.probe_ref = remap[r.probe_ref];
            r.gallery_ref = remap[r.gallery_ref];
            out.records.push_back(r);
        }
    }
    return out;
}

struct GenArgs {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<int> subjects;
    std::string out;
};

int do_gen(const GenArgs& a) {
    SynthConfig config = a.config ? synth_config_from_json_file(*a.config)
                                  : default_synth_config();
    if (a.subjects) config.n_subjects = *a.subjects;
    if (a.seed) config.seed = *a.seed;
    validate(config);
    GeneratedDataset dataset = generate_dataset(config);
    write_dataset(dataset, a.out);
    std::printf("wrote %zu templates and manifest.json under %s\n", dataset.templates.size(),
                a.out.c_str());
    return 0;
}

struct MatchArgs {
    std::string manifest;
    std::string out;
    int phalanx = 1;
    int jobs = 1;
    bool dedup = false;
    MatcherParams params;
};

int do_match(const MatchArgs& a) {
    DatasetManifest manifest = load_manifest(a.manifest);
    std::vector<MinutiaTemplate> templates =
        load_templates(manifest, fs::path(a.manifest).parent_path());
    std::array<Phalanx, 1> ps{phalanx_from_number(a.phalanx)};
    PairOptions options;
    options.dedup_symmetric = a.dedup;
    std::vector<MatchPair> pairs = generate_pairs(manifest, default_channels(ps), options);
    ScoreTable table = execute_matching(manifest, pairs, templates, a.params, a.jobs);
    write_score_csv(table, a.out);
    PairCounts counts = tally_pairs(pairs);
    std::printf("matched %zu pairs (%lld genuine, %lld imposter) -> %s\n", pairs.size(),
                static_cast<long long>(counts.genuine), static_cast<long long>(counts.imposter),
                a.out.c_str());
    return 0;
}

struct FuseArgs {
    std::vector<std::string> scores;
    std::string manifest;
    std::string out;
    std::string policy = "simple";
    std::optional<std::string> weights;
    std::optional<std::string> fingers;
    std::optional<std::string> phalanges;
    bool per_finger = false;
    bool strict = false;
    double max_score = 100.0;
};

int do_fuse(const FuseArgs& a) {
    std::vector<ScoreTable> parts;
    for (const std::string& p : a.scores) parts.push_back(import_scores(p, a.max_score));
    ScoreTable table = merge_tables(std::move(parts));
    DatasetManifest manifest = load_manifest(a.manifest);

    FusionScenario scenario;
    scenario.fingers = a.fingers ? parse_fingers(*a.fingers)
                                 : std::vector<Finger>{Finger::index, Finger::middle,
                                                       Finger::ring, Finger::little};
    scenario.fuse_fingers = !a.per_finger;

    WeightPolicy policy;
    FusionPolicy kind = fusion_policy_from_string(a.policy);
    if (kind == FusionPolicy::static_weight) {
        std::map<Phalanx, double> w;
        if (a.weights) {
            w = parse_weights(*a.weights);
        } else if (a.phalanges) {
            w = default_static_weights(parse_phalanges(*a.phalanges));
        } else {
            throw ConfigError("static policy needs --weights or --phalanges");
        }
        policy = make_static_policy(w);
        for (const auto& [p, v] : w) {
            (void)v;
            scenario.phalanges.push_back(p);
        }
    } else {
        policy = kind == FusionPolicy::quality_based ? make_quality_policy()
                                                     : make_simple_sum_policy();
        if (!a.phalanges) throw ConfigError("--phalanges required for this policy");
        scenario.phalanges = parse_phalanges(*a.phalanges);
    }
    if (a.phalanges && kind == FusionPolicy::static_weight) {
        // When both are given they must agree.
        std::vector<Phalanx> ps = parse_phalanges(*a.phalanges);
        if (std::set<Phalanx>(ps.begin(), ps.end()) !=
            std::set<Phalanx>(scenario.phalanges.begin(), scenario.phalanges.end()))
            throw ConfigError("--phalanges and --weights disagree");
    }

    FusionSetResult sets = build_fusion_sets(table, manifest, scenario,
                                             PairingRule::matched_impressions, a.strict);
    std::vector<FusedScore> fused = fuse_all(sets.sets, policy, table);
    for (FusedScore& f : fused) f.value = round6(f.value);
    write_fused_csv(fused, policy.kind, a.out);
    std::printf("fused %zu trials (%lld dropped as incomplete) -> %s\n", fused.size(),
                static_cast<long long>(sets.dropped_trials), a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::optional<std::string> scores;
    std::optional<std::string> fused;
    std::string out;
    std::string name = "eval";
    std::string far_targets = "1e-3,1e-4,1e-5,1e-6";
    bool strict = false;
    double max_score = 100.0;
};

int do_eval(const EvalArgs& a) {
    if (a.scores.has_value() == a.fused.has_value())
        throw ConfigError("exactly one of --scores / --fused required");
    std::vector<double> genuine, imposter;
    EvaluationMetadata meta;
    meta.scenario = a.name;
    if (a.fused) {
        FusionPolicy policy = FusionPolicy::simple_sum;
        std::vector<FusedScore> fused = read_fused_csv(*a.fused, &policy);
        meta.policy = fused.empty() ? "none" : to_string(policy);
        for (const FusedScore& f : fused) (f.genuine ? genuine : imposter).push_back(f.value);
    } else {
        ScoreTable table = import_scores(*a.scores, a.max_score);
        for (const ScoreRecord& r : table.records)
            (r.genuine ? genuine : imposter).push_back(r.score);
    }
    ChannelEvaluation eval = evaluate_channel(genuine, imposter, parse_doubles(a.far_targets));
    fs::create_directories(a.out);
    write_roc_csv(eval.roc, fs::path(a.out) / "roc.csv");
    write_text(fs::path(a.out) / "report.json", evaluation_report_text(meta, eval));
    std::printf("%s: %lld genuine, %lld imposter, EER %.4f%%\n", a.name.c_str(),
                static_cast<long long>(eval.roc.n_genuine),
                static_cast<long long>(eval.roc.n_imposter), eval.eer * 100.0);
    for (const OperatingPoint& op : eval.operating_points) {
        if (op.attainable)
            std::printf("  FAR <= %g: GAR %.4f%% [%.4f%%, %.4f%%] at threshold %g\n",
                        op.far_target, op.gar * 100.0, op.ci_lower * 100.0, op.ci_upper * 100.0,
                        op.threshold);
        else
            std::printf("  FAR <= %g: unattainable (1/%lld floor)\n", op.far_target,
                        static_cast<long long>(eval.roc.n_imposter));
    }
    if (a.strict)
        for (const OperatingPoint& op : eval.operating_points)
            if (!op.attainable) {
                char buf[128];
                std::snprintf(buf, sizeof buf, "FAR target %g has no admissible threshold",
                              op.far_target);
                throw UnattainableError(buf);
            }
    return 0;
}

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> jobs;
    bool strict = false;
    bool dedup = false;
};

int do_run(const RunArgs& a) {
    RunConfig config = run_config_from_json_file(a.config);
    if (a.seed) {
        if (!config.synth) throw ConfigError("--seed is only meaningful with a synth source");
        config.synth->seed = *a.seed;
    }
    if (a.out) config.out_dir = *a.out;
    if (a.jobs) config.jobs = *a.jobs;
    if (a.strict) config.strict = true;
    if (a.dedup) config.dedup_symmetric = true;
    validate(config);
    run_pipeline(config);
    std::printf("run complete: %s\n", config.out_dir.string().c_str());
    return 0;
}

struct ImportArgs {
    std::string scores;
    std::optional<std::string> out;
    double max_score = 100.0;
};

int do_import(const ImportArgs& a) {
    ScoreTable table = import_scores(a.scores, a.max_score);
    long long genuine = 0;
    for (const ScoreRecord& r : table.records) genuine += r.genuine ? 1 : 0;
    std::printf("%s: %zu records (%lld genuine, %lld imposter), %zu template ids\n",
                a.scores.c_str(), table.records.size(), genuine,
                static_cast<long long>(table.records.size()) - genuine, table.ids.size());
    if (a.out) write_score_csv(table, *a.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multifinger / multiphalanx fingerprint fusion toolkit"};
    app.set_version_flag("--version", std::string(kVersionString));
    app.require_subcommand(1);

    GenArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen", "generate a deterministic synthetic dataset");
    gen->add_option("--config", gen_args.config, "synthetic config JSON");
    gen->add_option("--seed", gen_args.seed, "seed override");
    gen->add_option("--subjects", gen_args.subjects, "subject count override");
    gen->add_option("--out", gen_args.out, "output dataset directory")->required();

    MatchArgs match_args;
    CLI::App* match = app.add_subcommand("match", "score all template pairs of one phalanx");
    match->add_option("--manifest", match_args.manifest, "dataset manifest JSON")->required();
    match->add_option("--out", match_args.out, "output score CSV")->required();
    match->add_option("--phalanx", match_args.phalanx, "phalanx channel (1..3)")->required();
    match->add_option("--jobs", match_args.jobs, "worker threads (0 = all cores)");
    match->add_flag("--dedup-symmetric", match_args.dedup, "enumerate each pair once");
    match->add_option("--distance-tolerance", match_args.params.distance_tolerance,
                      "pairing distance tolerance, px");
    match->add_option("--angle-tolerance", match_args.params.angle_tolerance,
                      "pairing angle tolerance, 1/256 turn units");
    match->add_option("--score-scale", match_args.params.score_scale, "score scale factor");

    FuseArgs fuse_args;
    CLI::App* fuse = app.add_subcommand("fuse", "combine channel scores into fused trials");
    fuse->add_option("--scores", fuse_args.scores, "score CSV (repeatable, one per phalanx)")
        ->required()
        ->expected(-1);
    fuse->add_option("--manifest", fuse_args.manifest, "dataset manifest JSON")->required();
    fuse->add_option("--out", fuse_args.out, "output fused CSV")->required();
    fuse->add_option("--policy", fuse_args.policy, "quality | simple | static");
    fuse->add_option("--weights", fuse_args.weights, "static weights, e.g. 2=0.7,3=0.3");
    fuse->add_option("--fingers", fuse_args.fingers, "finger subset, e.g. index,middle");
    fuse->add_option("--phalanges", fuse_args.phalanges, "phalanx subset, e.g. 2,3");
    fuse->add_flag("--per-finger", fuse_args.per_finger,
                   "fuse phalanges within each finger instead of across fingers");
    fuse->add_flag("--strict", fuse_args.strict, "fail on incomplete trials");
    fuse->add_option("--max-score", fuse_args.max_score, "score upper bound for validation");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "ROC, EER and operating points for a score set");
    eval->add_option("--scores", eval_args.scores, "raw score CSV");
    eval->add_option("--fused", eval_args.fused, "fused score CSV");
    eval->add_option("--out", eval_args.out, "output directory (roc.csv, report.json)")
        ->required();
    eval->add_option("--name", eval_args.name, "label used inside the report");
    eval->add_option("--far-targets", eval_args.far_targets, "comma-separated FAR fractions");
    eval->add_flag("--strict", eval_args.strict, "exit 4 when a FAR target is unattainable");
    eval->add_option("--max-score", eval_args.max_score, "score upper bound for validation");

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "full pipeline from a run config JSON");
    run->add_option("--config", run_args.config, "run config JSON")->required();
    run->add_option("--seed", run_args.seed, "seed override (synth source only)");
    run->add_option("--out", run_args.out, "output directory override");
    run->add_option("--jobs", run_args.jobs, "worker threads (0 = all cores)");
    run->add_flag("--strict", run_args.strict, "strict mode");
    run->add_flag("--dedup-symmetric", run_args.dedup, "enumerate each pair once");

    ImportArgs import_args;
    CLI::App* import_cmd = app.add_subcommand("import", "validate an external score CSV");
    import_cmd->add_option("--scores", import_args.scores, "score CSV to validate")->required();
    import_cmd->add_option("--out", import_args.out, "re-emit the normalized CSV here");
    import_cmd->add_option("--max-score", import_args.max_score,
                           "score upper bound for validation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(gen)) return do_gen(gen_args);
        if (app.got_subcommand(match)) return do_match(match_args);
        if (app.got_subcommand(fuse)) return do_fuse(fuse_args);
        if (app.got_subcommand(eval)) return do_eval(eval_args);
        if (app.got_subcommand(run)) return do_run(run_args);
        if (app.got_subcommand(import_cmd)) return do_import(import_args);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const UnattainableError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
