#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "phalanx/manifest.hpp"
#include "phalanx/matcher.hpp"
#include "phalanx/types.hpp"

namespace phalanx {

struct Channel {
    Finger finger = Finger::index;
    Phalanx phalanx = Phalanx::distal;
    friend bool operator==(const Channel&, const Channel&) = default;
};

// All non-thumb fingers crossed with the given phalanges.
std::vector<Channel> default_channels(std::span<const Phalanx> phalanges);

// One ordered comparison. Matching is restricted to a single phalanx: probe
// and gallery always share the phalanx, while imposter pairs may cross
// fingers inside the pooled channel set (a genuine pair, being one virtual
// subject, never does). Template ids resolve through the manifest.
struct MatchPair {
    std::uint32_t probe_index = 0;  // manifest entry index
    std::uint32_t gallery_index = 0;
    bool genuine = false;
};

struct PairOptions {
    // Keep only one direction of each (a,b)/(b,a) couple; halves the work
    // when the matcher is treated as symmetric, and halves the counts.
    bool dedup_symmetric = false;
};

// Enumerates every ordered pair (a, b), a != b, of entries whose (finger,
// phalanx) is in the filter, restricted to equal phalanx, sorted by probe
// template id then gallery template id (phalanx pools in 1, 2, 3 order).
std::vector<MatchPair> generate_pairs(const DatasetManifest& manifest,
                                      std::span<const Channel> channel_filter,
                                      const PairOptions& options = {});

struct PairCounts {
    std::int64_t genuine = 0;
    std::int64_t imposter = 0;
};

// Closed form: per phalanx pool of N templates, genuine = sum over virtual
// subjects of k*(k-1), imposter = N^2 - sum of k^2. Used to cross-check the
// enumeration.
PairCounts count_pairs(const DatasetManifest& manifest, std::span<const Channel> channel_filter,
                       const PairOptions& options = {});
PairCounts tally_pairs(std::span<const MatchPair> pairs);

struct ScoreRecord {
    std::uint32_t probe_ref = 0;  // index into ScoreTable::ids
    std::uint32_t gallery_ref = 0;
    double score = 0.0;  // stored at 4-decimal precision
    Finger probe_finger = Finger::index;
    Finger gallery_finger = Finger::index;
    Phalanx phalanx = Phalanx::distal;
    bool genuine = false;
    std::uint8_t nfiq_probe = 3;
    std::uint8_t nfiq_gallery = 3;
};

struct ScoreTable {
    std::vector<std::string> ids;  // unique template ids referenced by records
    std::vector<ScoreRecord> records;
    std::uint64_t params_hash = 0;    // provenance; 0 when imported
    std::uint64_t manifest_hash = 0;  // provenance; 0 when imported
};

// Loads every entry's template through the codec, in entry order.
// file_path is resolved against base_dir. Throws ProtocolError
// (missing_template) or CodecError.
std::vector<MinutiaTemplate> load_templates(const DatasetManifest& manifest,
                                            const std::filesystem::path& base_dir);

// Scores every pair. templates must align with manifest entries. Output order
// equals pair order for any job count; workers fill disjoint slices. jobs = 0
// means hardware concurrency.
ScoreTable execute_matching(const DatasetManifest& manifest, std::span<const MatchPair> pairs,
                            std::span<const MinutiaTemplate> templates,
                            const MatcherParams& params = {}, int jobs = 1);

std::uint64_t params_hash(const MatcherParams& params);

// CSV: probe_id,gallery_id,finger,phalanx,genuine,score,nfiq_probe,nfiq_gallery
// finger is the probe's; score carries 4 decimals; genuine is 1/0.
void write_score_csv(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable read_score_csv(const std::filesystem::path& path);

}  // namespace phalanx
