#include "phalanx/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <thread>
#include <unordered_map>

#include "phalanx/codec.hpp"

#include "internal_util.hpp"

namespace phalanx {

std::vector<Channel> default_channels(std::span<const Phalanx> phalanges) {
    static constexpr Finger kFingers[] = {Finger::index, Finger::middle, Finger::ring,
                                          Finger::little};
    std::vector<Channel> out;
    for (Phalanx p : phalanges)
        for (Finger f : kFingers) out.push_back({f, p});
    return out;
}

namespace {

bool in_filter(std::span<const Channel> filter, Finger f, Phalanx p) {
    for (const Channel& c : filter)
        if (c.finger == f && c.phalanx == p) return true;
    return false;
}

// Entry indices per phalanx pool, sorted by template id.
std::array<std::vector<std::uint32_t>, 4> build_pools(const DatasetManifest& manifest,
                                                      std::span<const Channel> filter) {
    std::array<std::vector<std::uint32_t>, 4> pools;  // index by phalanx number 1..3
    for (std::uint32_t i = 0; i < manifest.size(); ++i) {
        const ManifestEntry& e = manifest.entry(i);
        if (in_filter(filter, e.finger, e.phalanx))
            pools[phalanx_number(e.phalanx)].push_back(i);
    }
    for (auto& pool : pools)
        std::sort(pool.begin(), pool.end(), [&](std::uint32_t a, std::uint32_t b) {
            return manifest.entry(a).template_id < manifest.entry(b).template_id;
        });
    return pools;
}

}  // namespace

std::vector<MatchPair> generate_pairs(const DatasetManifest& manifest,
                                      std::span<const Channel> channel_filter,
                                      const PairOptions& options) {
    auto pools = build_pools(manifest, channel_filter);

    std::size_t total = 0;
    for (const auto& pool : pools)
        if (pool.size() > 1) total += pool.size() * (pool.size() - 1);
    if (options.dedup_symmetric) total /= 2;

    std::vector<MatchPair> pairs;
    pairs.reserve(total);
    for (const auto& pool : pools) {
        for (std::size_t a = 0; a < pool.size(); ++a) {
            std::uint32_t pa = pool[a];
            std::uint32_t vs_a = manifest.virtual_subject_of(pa);
            std::size_t b_begin = options.dedup_symmetric ? a + 1 : 0;
            for (std::size_t b = b_begin; b < pool.size(); ++b) {
                if (a == b) continue;
                std::uint32_t pb = pool[b];
                pairs.push_back({pa, pb, vs_a == manifest.virtual_subject_of(pb)});
            }
        }
    }
    return pairs;
}

PairCounts count_pairs(const DatasetManifest& manifest, std::span<const Channel> channel_filter,
                       const PairOptions& options) {
    auto pools = build_pools(manifest, channel_filter);
    PairCounts counts;
    for (const auto& pool : pools) {
        if (pool.empty()) continue;
        std::unordered_map<std::uint32_t, std::int64_t> per_vs;
        for (std::uint32_t i : pool) ++per_vs[manifest.virtual_subject_of(i)];
        std::int64_t n = static_cast<std::int64_t>(pool.size());
        std::int64_t sum_k2 = 0, sum_kk1 = 0;
        for (const auto& [vs, k] : per_vs) {
            sum_k2 += k * k;
            sum_kk1 += k * (k - 1);
        }
        counts.genuine += sum_kk1;
        counts.imposter += n * n - sum_k2;
    }
    if (options.dedup_symmetric) {
        counts.genuine /= 2;
        counts.imposter /= 2;
    }
    return counts;
}

PairCounts tally_pairs(std::span<const MatchPair> pairs) {
    PairCounts counts;
    for (const MatchPair& p : pairs)
        (p.genuine ? counts.genuine : counts.imposter) += 1;
    return counts;
}

std::vector<MinutiaTemplate> load_templates(const DatasetManifest& manifest,
                                            const std::filesystem::path& base_dir) {
    std::vector<MinutiaTemplate> out;
    out.reserve(manifest.size());
    for (const ManifestEntry& e : manifest.entries()) {
        if (e.file_path.empty())
            throw ProtocolError(ProtocolFault::missing_template,
                                e.template_id + " has no file_path");
        std::filesystem::path p(e.file_path);
        if (p.is_relative()) p = base_dir / p;
        if (!std::filesystem::exists(p))
            throw ProtocolError(ProtocolFault::missing_template,
                                e.template_id + ": no such file " + p.string());
        out.push_back(read_template_file(p));
    }
    return out;
}

std::uint64_t params_hash(const MatcherParams& params) {
    detail::Fnv1a h;
    h.update_double(params.distance_tolerance);
    h.update_u64(static_cast<std::uint64_t>(params.angle_tolerance));
    h.update_u64(static_cast<std::uint64_t>(params.bin_dx));
    h.update_u64(static_cast<std::uint64_t>(params.bin_dy));
    h.update_u64(static_cast<std::uint64_t>(params.bin_dtheta));
    h.update_double(params.score_scale);
    return h.h;
}

ScoreTable execute_matching(const DatasetManifest& manifest, std::span<const MatchPair> pairs,
                            std::span<const MinutiaTemplate> templates,
                            const MatcherParams& params, int jobs) {
    validate(params);
    if (templates.size() != manifest.size())
        throw ProtocolError(ProtocolFault::missing_template,
                            "template list does not cover the manifest");
    for (const MatchPair& p : pairs)
        if (p.probe_index >= manifest.size() || p.gallery_index >= manifest.size())
            throw ProtocolError(ProtocolFault::unknown_id, "pair references unknown entry");

    ScoreTable table;
    table.ids.reserve(manifest.size());
    for (const ManifestEntry& e : manifest.entries()) table.ids.push_back(e.template_id);
    table.params_hash = params_hash(params);
    table.manifest_hash = manifest.content_hash();
    table.records.resize(pairs.size());

    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const MatchPair& pair = pairs[i];
            const ManifestEntry& pe = manifest.entry(pair.probe_index);
            const ManifestEntry& ge = manifest.entry(pair.gallery_index);
            ScoreRecord& r = table.records[i];
            r.probe_ref = pair.probe_index;
            r.gallery_ref = pair.gallery_index;
            r.score = detail::quantize(
                match_score(templates[pair.probe_index], templates[pair.gallery_index], params), 4);
            r.probe_finger = pe.finger;
            r.gallery_finger = ge.finger;
            r.phalanx = pe.phalanx;
            r.genuine = pair.genuine;
            r.nfiq_probe = pe.nfiq;
            r.nfiq_gallery = ge.nfiq;
        }
    };

    std::size_t n = pairs.size();
    unsigned want = jobs <= 0 ? std::max(1u, std::thread::hardware_concurrency())
                              : static_cast<unsigned>(jobs);
    if (want <= 1 || n < 2048) {
        worker(0, n);
    } else {
        // Contiguous slices; each worker owns its stretch of the output, so
        // the table is independent of scheduling.
        unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(want, n));
        std::vector<std::thread> threads;
        threads.reserve(n_threads);
        std::size_t chunk = (n + n_threads - 1) / n_threads;
        for (unsigned t = 0; t < n_threads; ++t) {
            std::size_t begin = t * chunk;
            std::size_t end = std::min(n, begin + chunk);
            if (begin >= end) break;
            threads.emplace_back(worker, begin, end);
        }
        for (auto& th : threads) th.join();
    }
    return table;
}

void write_score_csv(const ScoreTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    std::string buf;
    buf.reserve(1 << 20);
    buf += "probe_id,gallery_id,finger,phalanx,genuine,score,nfiq_probe,nfiq_gallery\n";
    char line[64];
    for (const ScoreRecord& r : table.records) {
        buf += table.ids[r.probe_ref];
        buf += ',';
        buf += table.ids[r.gallery_ref];
        buf += ',';
        buf += to_string(r.probe_finger);
        std::snprintf(line, sizeof line, ",%d,%d,%.4f,%d,%d\n", phalanx_number(r.phalanx),
                      r.genuine ? 1 : 0, r.score, r.nfiq_probe, r.nfiq_gallery);
        buf += line;
        if (buf.size() > (1 << 20) - 512) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("short write to " + path.string());
}

namespace {

[[noreturn]] void csv_fail(const std::filesystem::path& path, std::size_t line_no,
                           const std::string& what) {
    throw ProtocolError(ProtocolFault::schema,
                        path.string() + ":" + std::to_string(line_no) + ": " + what);
}

template <typename T>
T parse_num(std::string_view s, const std::filesystem::path& path, std::size_t line_no,
            const char* field) {
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        csv_fail(path, line_no, std::string("bad ") + field + " value: " + std::string(s));
    return value;
}

}  // namespace

ScoreTable read_score_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ProtocolError(ProtocolFault::schema, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) csv_fail(path, 1, "missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "probe_id,gallery_id,finger,phalanx,genuine,score,nfiq_probe,nfiq_gallery")
        csv_fail(path, 1, "unexpected header: " + line);

    ScoreTable table;
    std::unordered_map<std::string, std::uint32_t> interned;
    auto intern = [&](std::string_view id) {
        auto it = interned.find(std::string(id));
        if (it != interned.end()) return it->second;
        std::uint32_t ref = static_cast<std::uint32_t>(table.ids.size());
        table.ids.emplace_back(id);
        interned.emplace(table.ids.back(), ref);
        return ref;
    };

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<std::string_view, 8> fields;
        std::string_view rest(line);
        for (int f = 0; f < 8; ++f) {
            std::size_t comma = rest.find(',');
            if (f < 7) {
                if (comma == std::string_view::npos) csv_fail(path, line_no, "expected 8 fields");
                fields[f] = rest.substr(0, comma);
                rest.remove_prefix(comma + 1);
            } else {
                if (comma != std::string_view::npos) csv_fail(path, line_no, "expected 8 fields");
                fields[f] = rest;
            }
        }
        ScoreRecord r;
        r.probe_ref = intern(fields[0]);
        r.gallery_ref = intern(fields[1]);
        try {
            r.probe_finger = finger_from_string(fields[2]);
            r.gallery_finger = r.probe_finger;  // CSV carries the probe's finger
            r.phalanx = phalanx_from_number(parse_num<int>(fields[3], path, line_no, "phalanx"));
        } catch (const ProtocolError& e) {
            csv_fail(path, line_no, e.what());
        }
        int genuine = parse_num<int>(fields[4], path, line_no, "genuine");
        if (genuine != 0 && genuine != 1) csv_fail(path, line_no, "genuine must be 0 or 1");
        r.genuine = genuine == 1;
        r.score = parse_num<double>(fields[5], path, line_no, "score");
        int nfiq_p = parse_num<int>(fields[6], path, line_no, "nfiq_probe");
        int nfiq_g = parse_num<int>(fields[7], path, line_no, "nfiq_gallery");
        if (nfiq_p < 0 || nfiq_p > 255 || nfiq_g < 0 || nfiq_g > 255)
            csv_fail(path, line_no, "nfiq outside byte range");
        r.nfiq_probe = static_cast<std::uint8_t>(nfiq_p);
        r.nfiq_gallery = static_cast<std::uint8_t>(nfiq_g);
        table.records.push_back(r);
    }
    return table;
}

}  // namespace phalanx
