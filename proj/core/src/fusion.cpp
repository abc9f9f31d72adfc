#include "phalanx/fusion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <unordered_map>

#include "internal_util.hpp"

namespace phalanx {

const char* to_string(FusionPolicy p) {
    switch (p) {
        case FusionPolicy::quality_based: return "quality_based";
        case FusionPolicy::simple_sum: return "simple_sum";
        case FusionPolicy::static_weight: return "static_weight";
    }
    return "?";
}

FusionPolicy fusion_policy_from_string(std::string_view s) {
    if (s == "quality_based" || s == "quality") return FusionPolicy::quality_based;
    if (s == "simple_sum" || s == "sum") return FusionPolicy::simple_sum;
    if (s == "static_weight" || s == "static") return FusionPolicy::static_weight;
    throw FusionError(FusionFault::range, "unknown fusion policy: " + std::string(s));
}

WeightPolicy make_quality_policy() { return {FusionPolicy::quality_based, {}}; }
WeightPolicy make_simple_sum_policy() { return {FusionPolicy::simple_sum, {}}; }

WeightPolicy make_static_policy(const std::map<Phalanx, double>& weights) {
    if (weights.empty())
        throw FusionError(FusionFault::invalid_static_weights, "static weights are empty");
    double sum = 0.0;
    for (const auto& [ph, w] : weights) {
        if (!(w > 0.0) || !(w < 1.0))
            throw FusionError(FusionFault::invalid_static_weights,
                              "static weight for phalanx " + std::to_string(phalanx_number(ph)) +
                                  " outside (0,1)");
        sum += w;
    }
    if (weights.size() > 1 && std::abs(sum - 1.0) > 1e-9)
        throw FusionError(FusionFault::invalid_static_weights, "static weights must sum to 1");
    // More proximal phalanges carry strictly less weight.
    double prev = 2.0;
    for (const auto& [ph, w] : weights) {  // map iterates distal -> proximal
        if (!(w < prev))
            throw FusionError(FusionFault::invalid_static_weights,
                              "static weights must strictly decrease toward proximal phalanges");
        prev = w;
    }
    return {FusionPolicy::static_weight, weights};
}

std::map<Phalanx, double> default_static_weights(std::span<const Phalanx> phalanges) {
    std::vector<Phalanx> sorted(phalanges.begin(), phalanges.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted == std::vector<Phalanx>{Phalanx::middle, Phalanx::proximal})
        return {{Phalanx::middle, 0.7}, {Phalanx::proximal, 0.3}};
    if (sorted == std::vector<Phalanx>{Phalanx::distal, Phalanx::middle, Phalanx::proximal})
        return {{Phalanx::distal, 0.5}, {Phalanx::middle, 0.4}, {Phalanx::proximal, 0.1}};
    throw FusionError(FusionFault::missing_static_weight,
                      "no default static weights for this phalanx set; pass them explicitly");
}

std::vector<std::map<Phalanx, double>> sweep_static_weights(std::span<const Phalanx> phalanges,
                                                            double step) {
    if (!(step > 0.0) || !(step < 1.0))
        throw FusionError(FusionFault::range, "sweep step outside (0,1)");
    std::vector<Phalanx> sorted(phalanges.begin(), phalanges.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    int levels = static_cast<int>(std::llround(1.0 / step));

    std::vector<std::map<Phalanx, double>> out;
    // Enumerate weight vectors on the integer grid, keep the admissible ones.
    std::vector<int> units(sorted.size());
    auto emit = [&]() {
        std::map<Phalanx, double> w;
        for (std::size_t i = 0; i < sorted.size(); ++i) w[sorted[i]] = units[i] * step;
        try {
            make_static_policy(w);
        } catch (const FusionError&) {
            return;
        }
        out.push_back(std::move(w));
    };
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
        if (i + 1 == units.size()) {
            units[i] = left;
            if (left >= 1) emit();
            return;
        }
        for (int u = 1; u < left; ++u) {
            units[i] = u;
            rec(i + 1, left - u);
        }
    };
    if (!sorted.empty()) rec(0, levels);
    return out;
}

int invert_nfiq(int nfiq) {
    if (nfiq < 1 || nfiq > 5)
        throw FusionError(FusionFault::range, "nfiq outside 1..5: " + std::to_string(nfiq));
    return 6 - nfiq;
}

double weight_for(const WeightPolicy& policy, const ScoreRecord& record) {
    switch (policy.kind) {
        case FusionPolicy::quality_based:
            return invert_nfiq(record.nfiq_probe) + invert_nfiq(record.nfiq_gallery);
        case FusionPolicy::simple_sum:
            return 1.0;
        case FusionPolicy::static_weight: {
            auto it = policy.static_weights.find(record.phalanx);
            if (it == policy.static_weights.end())
                throw FusionError(FusionFault::missing_static_weight,
                                  "no static weight for phalanx " +
                                      std::to_string(phalanx_number(record.phalanx)));
            return it->second;
        }
    }
    throw FusionError(FusionFault::range, "invalid policy kind");
}

namespace {

// Trial key: probe and gallery hand-subjects, the finger for per-finger
// trials (0xFF when fingers fuse), and the impression pair.
std::uint64_t pack_key(std::uint32_t phs, std::uint32_t ghs, std::uint8_t finger, std::uint8_t i,
                       std::uint8_t j) {
    return (static_cast<std::uint64_t>(phs) << 40) | (static_cast<std::uint64_t>(ghs) << 16) |
           (static_cast<std::uint64_t>(finger) << 8) | (i << 4) | j;
}

struct TrialSlots {
    std::array<std::uint32_t, 12> record{};  // by channel ordinal
    std::uint16_t filled_mask = 0;
};

}  // namespace

FusionSetResult build_fusion_sets(const ScoreTable& table, const DatasetManifest& manifest,
                                  const FusionScenario& scenario, PairingRule rule, bool strict) {
    (void)rule;  // matched_impressions is the only rule
    if (scenario.fingers.empty() || scenario.phalanges.empty())
        throw FusionError(FusionFault::range, "scenario needs at least one finger and phalanx");

    // Channel ordinals. Per-finger trials only key channels by phalanx.
    auto finger_pos = [&](Finger f) -> int {
        for (std::size_t i = 0; i < scenario.fingers.size(); ++i)
            if (scenario.fingers[i] == f) return static_cast<int>(i);
        return -1;
    };
    auto phalanx_pos = [&](Phalanx p) -> int {
        for (std::size_t i = 0; i < scenario.phalanges.size(); ++i)
            if (scenario.phalanges[i] == p) return static_cast<int>(i);
        return -1;
    };
    std::size_t needed = scenario.fuse_fingers
                             ? scenario.fingers.size() * scenario.phalanges.size()
                             : scenario.phalanges.size();
    if (needed > 12)
        throw FusionError(FusionFault::range, "scenario spans more than 12 channels");

    // Hand-subject ordinals in sorted (subject, hand) order.
    std::map<std::pair<std::string_view, Hand>, std::uint32_t> hs_ids;
    for (const ManifestEntry& e : manifest.entries())
        hs_ids.emplace(std::make_pair(std::string_view(e.subject_id), e.hand), 0);
    std::uint32_t next_hs = 0;
    for (auto& [key, id] : hs_ids) id = next_hs++;
    if (next_hs >= 0xFFFFFF)
        throw FusionError(FusionFault::range, "too many hand subjects for trial keys");

    // Table ids resolved against the manifest once.
    std::vector<std::uint32_t> entry_of_ref(table.ids.size());
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        std::size_t idx = manifest.index_of(table.ids[i]);
        if (idx == DatasetManifest::npos)
            throw FusionError(FusionFault::unknown_template,
                              "score table references unknown template " + table.ids[i]);
        entry_of_ref[i] = static_cast<std::uint32_t>(idx);
    }

    std::unordered_map<std::uint64_t, TrialSlots> trials;
    for (std::uint32_t ri = 0; ri < table.records.size(); ++ri) {
        const ScoreRecord& r = table.records[ri];
        const ManifestEntry& pe = manifest.entry(entry_of_ref[r.probe_ref]);
        const ManifestEntry& ge = manifest.entry(entry_of_ref[r.gallery_ref]);
        if (pe.finger != ge.finger) continue;  // cross-finger imposters cannot fuse
        if (pe.phalanx != ge.phalanx)
            throw FusionError(FusionFault::channel_conflict,
                              "record pairs templates of different phalanges: " +
                                  pe.template_id + " vs " + ge.template_id);
        int fp = finger_pos(pe.finger);
        int pp = phalanx_pos(pe.phalanx);
        if (fp < 0 || pp < 0) continue;  // outside the scenario

        std::uint32_t phs = hs_ids.at({std::string_view(pe.subject_id), pe.hand});
        std::uint32_t ghs = hs_ids.at({std::string_view(ge.subject_id), ge.hand});
        bool genuine = manifest.virtual_subject_of(entry_of_ref[r.probe_ref]) ==
                       manifest.virtual_subject_of(entry_of_ref[r.gallery_ref]);
        if (genuine != r.genuine)
            throw FusionError(FusionFault::channel_conflict,
                              "record genuine flag disagrees with the manifest for " +
                                  pe.template_id + " vs " + ge.template_id);

        std::uint8_t key_finger =
            scenario.fuse_fingers ? 0xFF : static_cast<std::uint8_t>(pe.finger);
        std::uint64_t key = pack_key(phs, ghs, key_finger, pe.impression, ge.impression);
        int slot = scenario.fuse_fingers
                       ? fp * static_cast<int>(scenario.phalanges.size()) + pp
                       : pp;
        TrialSlots& t = trials[key];
        if (t.filled_mask & (1u << slot))
            throw FusionError(FusionFault::channel_conflict,
                              "two records claim one channel of a fused trial (" +
                                  pe.template_id + " vs " + ge.template_id + ")");
        t.filled_mask |= static_cast<std::uint16_t>(1u << slot);
        t.record[static_cast<std::size_t>(slot)] = ri;
    }

    std::vector<std::uint64_t> keys;
    keys.reserve(trials.size());
    for (const auto& [key, slots] : trials) keys.push_back(key);
    std::sort(keys.begin(), keys.end());

    // Reverse lookup for trial ids.
    std::vector<const std::pair<const std::pair<std::string_view, Hand>, std::uint32_t>*> hs_by_id(
        next_hs);
    for (const auto& kv : hs_ids) hs_by_id[kv.second] = &kv;

    const std::uint16_t full = static_cast<std::uint16_t>((1u << needed) - 1);
    FusionSetResult result;
    result.sets.reserve(trials.size());
    for (std::uint64_t key : keys) {
        const TrialSlots& t = trials.at(key);
        if (t.filled_mask != full) {
            ++result.dropped_trials;
            if (strict) {
                std::uint32_t phs = static_cast<std::uint32_t>(key >> 40);
                throw FusionError(FusionFault::incomplete_channel,
                                  "trial for probe subject " +
                                      std::string(hs_by_id[phs]->first.first) +
                                      " is missing a channel score");
            }
            continue;
        }
        std::uint32_t phs = static_cast<std::uint32_t>(key >> 40);
        std::uint32_t ghs = static_cast<std::uint32_t>((key >> 16) & 0xFFFFFF);
        std::uint8_t key_finger = static_cast<std::uint8_t>((key >> 8) & 0xFF);
        std::uint8_t imp_i = (key >> 4) & 0xF;
        std::uint8_t imp_j = key & 0xF;

        FusionSet set;
        set.genuine = table.records[t.record[0]].genuine;
        std::string id;
        id += hs_by_id[phs]->first.first;
        id += hs_by_id[phs]->first.second == Hand::left ? "-L" : "-R";
        id += '~';
        id += hs_by_id[ghs]->first.first;
        id += hs_by_id[ghs]->first.second == Hand::left ? "-L" : "-R";
        id += "~i";
        id += static_cast<char>('0' + imp_i);
        id += 'j';
        id += static_cast<char>('0' + imp_j);
        if (key_finger != 0xFF) {
            id += '~';
            id += to_string(static_cast<Finger>(key_finger));
        }
        set.trial_id = std::move(id);
        for (std::size_t slot = 0; slot < needed; ++slot) {
            std::uint32_t ri = t.record[slot];
            const ScoreRecord& r = table.records[ri];
            Finger f = scenario.fuse_fingers
                           ? scenario.fingers[slot / scenario.phalanges.size()]
                           : static_cast<Finger>(key_finger);
            Phalanx p = scenario.phalanges[slot % scenario.phalanges.size()];
            if (r.genuine != set.genuine)
                throw FusionError(FusionFault::channel_conflict,
                                  "constituents disagree on genuineness in trial " + set.trial_id);
            set.members.push_back({ri, f, p});
        }
        result.sets.push_back(std::move(set));
    }
    return result;
}

FusedScore fuse(const FusionSet& set, const WeightPolicy& policy, const ScoreTable& table) {
    if (set.members.empty()) throw FusionError(FusionFault::range, "empty fusion set");
    double weight_sum = 0.0;
    double min_s = std::numeric_limits<double>::infinity();
    double max_s = -min_s;
    for (const FusionConstituent& m : set.members) {
        const ScoreRecord& r = table.records[m.record_index];
        weight_sum += weight_for(policy, r);
        min_s = std::min(min_s, r.score);
        max_s = std::max(max_s, r.score);
    }
    if (!(weight_sum > 0.0))
        throw FusionError(FusionFault::zero_weight_sum, "fusion weights sum to zero in trial " +
                                                            set.trial_id);
    // Normalised accumulation: uniform weights produce exactly w/sum = 1/n,
    // making quality_based with equal grades bit-identical to simple_sum.
    double fused = 0.0;
    for (const FusionConstituent& m : set.members) {
        const ScoreRecord& r = table.records[m.record_index];
        fused += (weight_for(policy, r) / weight_sum) * r.score;
    }
    // Convex combination, pinned against last-ulp drift.
    fused = std::min(std::max(fused, min_s), max_s);
    return {set.trial_id, fused, set.genuine, static_cast<std::uint32_t>(set.members.size())};
}

std::vector<FusedScore> fuse_all(std::span<const FusionSet> sets, const WeightPolicy& policy,
                                 const ScoreTable& table) {
    std::vector<FusedScore> out;
    out.reserve(sets.size());
    for (const FusionSet& s : sets) out.push_back(fuse(s, policy, table));
    return out;
}

void write_fused_csv(std::span<const FusedScore> scores, FusionPolicy policy,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    std::string buf;
    buf.reserve(1 << 20);
    buf += "trial_id,genuine,fused_score,policy,n_channels\n";
    char tail[64];
    for (const FusedScore& f : scores) {
        buf += f.trial_id;
        std::snprintf(tail, sizeof tail, ",%d,%.6f,%s,%u\n", f.genuine ? 1 : 0, f.value,
                      to_string(policy), f.n_channels);
        buf += tail;
        if (buf.size() > (1 << 20) - 512) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("short write to " + path.string());
}

std::vector<FusedScore> read_fused_csv(const std::filesystem::path& path,
                                       FusionPolicy* policy_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ProtocolError(ProtocolFault::schema, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw ProtocolError(ProtocolFault::schema, path.string() + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "trial_id,genuine,fused_score,policy,n_channels")
        throw ProtocolError(ProtocolFault::schema, path.string() + ": unexpected header");
    std::vector<FusedScore> out;
    FusionPolicy first_policy = FusionPolicy::simple_sum;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fail = [&](const std::string& what) -> void {
            throw ProtocolError(ProtocolFault::schema,
                                path.string() + ":" + std::to_string(line_no) + ": " + what);
        };
        std::array<std::string_view, 5> fields;
        std::string_view rest(line);
        for (int f = 0; f < 5; ++f) {
            std::size_t comma = rest.find(',');
            if (f < 4) {
                if (comma == std::string_view::npos) fail("expected 5 fields");
                fields[f] = rest.substr(0, comma);
                rest.remove_prefix(comma + 1);
            } else {
                if (comma != std::string_view::npos) fail("expected 5 fields");
                fields[f] = rest;
            }
        }
        FusedScore f;
        f.trial_id = std::string(fields[0]);
        if (fields[1] != "0" && fields[1] != "1") fail("genuine must be 0 or 1");
        f.genuine = fields[1] == "1";
        {
            auto [ptr, ec] =
                std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), f.value);
            if (ec != std::errc{} || ptr != fields[2].data() + fields[2].size())
                fail("bad fused_score");
        }
        FusionPolicy p = fusion_policy_from_string(fields[3]);
        if (out.empty())
            first_policy = p;
        else if (p != first_policy)
            fail("mixed policy tokens in one file");
        {
            auto [ptr, ec] = std::from_chars(fields[4].data(), fields[4].data() + fields[4].size(),
                                             f.n_channels);
            if (ec != std::errc{} || ptr != fields[4].data() + fields[4].size())
                fail("bad n_channels");
        }
        out.push_back(std::move(f));
    }
    if (policy_out) *policy_out = out.empty() ? FusionPolicy::simple_sum : first_policy;
    return out;
}

}  // namespace phalanx
