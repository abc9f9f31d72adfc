#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phalanx/evaluation.hpp"
#include "phalanx/fusion.hpp"
#include "phalanx/matcher.hpp"
#include "phalanx/protocol.hpp"
#include "phalanx/synthetic.hpp"

namespace phalanx {

struct ScenarioSpec {
    std::string name;
    std::vector<Finger> fingers;
    std::vector<Phalanx> phalanges;
    // Empty policy = raw pooled evaluation of the (single) phalanx channel,
    // no fusion step.
    std::optional<WeightPolicy> policy;
    bool fuse_fingers = true;
};

struct RunConfig {
    // Exactly one dataset source.
    std::optional<SynthConfig> synth;
    std::optional<std::filesystem::path> manifest_path;

    MatcherParams matcher;
    std::vector<ScenarioSpec> scenarios;
    std::vector<double> far_targets{1e-3, 1e-4, 1e-5, 1e-6};
    std::filesystem::path out_dir = "run";
    bool strict = false;
    bool dedup_symmetric = false;
    int jobs = 1;  // 0 = hardware concurrency
};

// Known preset names: scenario1_single_phalanx, scenario2_multiphalanx,
// scenario3a_two_finger, scenario3b_multi_finger. Throws ConfigError on
// anything else.
std::vector<ScenarioSpec> expand_preset(const std::string& preset);

// Throws ConfigError on duplicate scenario names, bad FAR targets, missing or
// doubled dataset source, or unsatisfiable scenario definitions.
void validate(const RunConfig& config);

// JSON with the RunConfig fields; "presets" entries expand in place.
RunConfig run_config_from_json_file(const std::filesystem::path& path);

// generate/load -> match per phalanx -> fuse per scenario -> evaluate.
// Emits under out_dir: dataset/ (when synthesizing), scores/phalanx<k>.csv,
// scenarios/<name>/{fused.csv,roc.csv,report.json}, correlations.json and
// run.lock.json. Reruns with the same config and seed are byte-identical;
// the job count never reaches the artifacts.
void run_pipeline(const RunConfig& config);

// Reads and validates an externally produced score CSV (same schema the
// matcher writes). max_score bounds the score column. Throws ProtocolError
// (schema / range).
ScoreTable import_scores(const std::filesystem::path& path, double max_score = 100.0);

// One scenario's evaluation bundle: the full curve plus the derived numbers
// every report carries.
struct ChannelEvaluation {
    RocCurve roc;
    double eer = 0.0;
    std::vector<OperatingPoint> operating_points;  // one per FAR target, in order
};

ChannelEvaluation evaluate_channel(std::span<const double> genuine,
                                   std::span<const double> imposter,
                                   std::span<const double> far_targets,
                                   double confidence = 0.95);

// Report header fields; empty or unset ones are simply omitted from the
// JSON, so imported score sets without scenario context still report.
struct EvaluationMetadata {
    std::string scenario;
    std::vector<Finger> fingers;
    std::vector<Phalanx> phalanges;
    std::string policy = "none";
    std::map<Phalanx, double> static_weights;
    std::optional<bool> fuse_fingers;
    std::optional<std::int64_t> dropped_trials;
};

// report.json body (trailing newline included): rates as 6-decimal fractions
// plus 1-decimal percents, unattainable operating points carry nulls instead
// of invented rates. Byte-stable for identical inputs.
std::string evaluation_report_text(const EvaluationMetadata& meta, const ChannelEvaluation& eval);

}  // namespace phalanx
