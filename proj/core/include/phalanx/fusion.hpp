#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "phalanx/manifest.hpp"
#include "phalanx/protocol.hpp"

namespace phalanx {

enum class FusionPolicy { quality_based, simple_sum, static_weight };
const char* to_string(FusionPolicy p);
FusionPolicy fusion_policy_from_string(std::string_view s);

struct WeightPolicy {
    FusionPolicy kind = FusionPolicy::simple_sum;
    std::map<Phalanx, double> static_weights;  // static_weight only
};

WeightPolicy make_quality_policy();
WeightPolicy make_simple_sum_policy();

// Static weights must each lie in (0,1), sum to 1 (1e-9), and strictly
// decrease from distal to proximal over the phalanges present. Throws
// FusionError(invalid_static_weights).
WeightPolicy make_static_policy(const std::map<Phalanx, double>& weights);

// Defaults taken over unchanged: (0.7, 0.3) for {middle, proximal} and
// (0.5, 0.4, 0.1) for all three phalanges.
std::map<Phalanx, double> default_static_weights(std::span<const Phalanx> phalanges);

// Every admissible static weight map on a fixed grid step (0.1 by default),
// for weight sweeps. Deterministic order.
std::vector<std::map<Phalanx, double>> sweep_static_weights(std::span<const Phalanx> phalanges,
                                                            double step = 0.1);

// Capture quality grade flipped so bigger is better: q = 6 - nfiq.
int invert_nfiq(int nfiq);

// quality_based: w = q_probe + q_gallery (2..10). simple_sum: w = 1.
// static_weight: w = weight of the record's phalanx.
double weight_for(const WeightPolicy& policy, const ScoreRecord& record);

// How constituent scores line up across channels within one fused trial.
// Only one rule exists: channel scores pair by identical (probe impression,
// gallery impression) indices.
enum class PairingRule { matched_impressions };

struct FusionConstituent {
    std::uint32_t record_index = 0;  // into the source ScoreTable
    Finger finger = Finger::index;
    Phalanx phalanx = Phalanx::distal;
};

struct FusionSet {
    std::string trial_id;
    std::vector<FusionConstituent> members;  // one per channel, channel order
    bool genuine = false;
};

struct FusionScenario {
    std::vector<Finger> fingers;
    std::vector<Phalanx> phalanges;
    // true: one trial spans every (finger, phalanx) channel of a hand.
    // false: each finger forms its own |phalanges|-channel trials and the
    // trials of all listed fingers are pooled.
    bool fuse_fingers = true;
};

struct FusionSetResult {
    std::vector<FusionSet> sets;
    std::int64_t dropped_trials = 0;  // trials missing some channel (non-strict)
};

// Groups same-finger records by (probe subject+hand, gallery subject+hand,
// impression pair) and per group collects exactly one record per channel.
// Incomplete groups are dropped and counted, or throw under strict.
// Throws FusionError (unknown_template, channel_conflict, incomplete_channel).
FusionSetResult build_fusion_sets(const ScoreTable& table, const DatasetManifest& manifest,
                                  const FusionScenario& scenario,
                                  PairingRule rule = PairingRule::matched_impressions,
                                  bool strict = false);

struct FusedScore {
    std::string trial_id;
    double value = 0.0;
    bool genuine = false;
    std::uint32_t n_channels = 0;
};

// Weighted mean of the constituent scores: F = sum(w*S) / sum(w), evaluated
// as sum((w/sum w) * S) so uniform weights reduce bit-exactly to the simple
// mean. Throws FusionError(zero_weight_sum).
FusedScore fuse(const FusionSet& set, const WeightPolicy& policy, const ScoreTable& table);
std::vector<FusedScore> fuse_all(std::span<const FusionSet> sets, const WeightPolicy& policy,
                                 const ScoreTable& table);

// CSV: trial_id,genuine,fused_score,policy,n_channels (fused_score, 6 decimals).
// All rows carry one policy token; the reader reports it through policy_out
// when asked.
void write_fused_csv(std::span<const FusedScore> scores, FusionPolicy policy,
                     const std::filesystem::path& path);
std::vector<FusedScore> read_fused_csv(const std::filesystem::path& path,
                                       FusionPolicy* policy_out = nullptr);

}  // namespace phalanx
