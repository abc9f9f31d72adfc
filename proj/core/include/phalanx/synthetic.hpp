#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>

#include "phalanx/manifest.hpp"
#include "phalanx/types.hpp"

namespace phalanx {

// Degradation knobs for one phalanx position, applied per impression.
struct PhalanxModel {
    double count_mean = 62.0;  // master minutiae count, gaussian
    double count_std = 16.0;
    double jitter_sigma = 4.5;     // px, per coordinate
    double deletion_rate = 0.15;   // per master minutia
    double spurious_rate = 0.12;   // expected spurious per master minutia
    std::array<double, 5> nfiq_probs{0.30, 0.30, 0.20, 0.13, 0.07};  // grades 1..5
};

// Worse capture grades get amplified noise; multipliers indexed by nfiq-1
// and non-decreasing.
struct QualityModel {
    std::array<double, 5> jitter_mult{0.8, 1.0, 1.3, 1.7, 2.2};
    std::array<double, 5> spurious_mult{0.8, 1.0, 1.4, 1.9, 2.5};
};

struct TransformRange {
    int max_dx = 15;     // px
    int max_dy = 15;     // px
    int max_dtheta = 8;  // angle units
};

struct SynthConfig {
    int n_subjects = 10;
    int fingers_per_hand = 4;  // 1..4 non-thumb fingers, index outward
    int impressions = 4;       // 1..4
    std::map<Phalanx, PhalanxModel> phalanx_models;  // defaults cover 1..3
    QualityModel quality;
    TransformRange transform;
    int image_width = 320;
    int image_height = 480;
    int resolution = 197;  // px/cm
    std::uint64_t seed = 24169;
};

SynthConfig default_synth_config();

// Throws ConfigError (rates outside [0,1], probabilities not summing to 1,
// non-positive counts, out-of-range structure fields).
void validate(const SynthConfig& config);

struct GeneratedDataset {
    DatasetManifest manifest;
    std::vector<MinutiaTemplate> templates;  // aligned with manifest entries
};

// For each (subject, hand, finger, phalanx): a master minutiae set drawn
// uniformly over the image; each impression applies an independent rigid
// transform (rotation about the image centre), gaussian coordinate jitter,
// Bernoulli deletions and Poisson spurious insertions, scaled by the
// impression's drawn capture grade. All randomness flows from the seed
// through per-finger derived streams, so output is bit-identical across
// runs and platforms for a given (config, seed).
GeneratedDataset generate_dataset(const SynthConfig& config);

// Writes templates/<template_id>.fmr through the codec plus manifest.json.
// Every downstream consumer re-reads the files, so the codec sits on the
// end-to-end path.
void write_dataset(const GeneratedDataset& dataset, const std::filesystem::path& out_dir);

SynthConfig synth_config_from_json_file(const std::filesystem::path& path);

}  // namespace phalanx
