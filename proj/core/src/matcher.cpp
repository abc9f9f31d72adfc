#include "phalanx/matcher.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>
#include <vector>

namespace phalanx {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct SinCos {
    std::array<double, 256> sin_v;
    std::array<double, 256> cos_v;
    SinCos() {
        for (int i = 0; i < 256; ++i) {
            double rad = kTwoPi * i / 256.0;
            sin_v[i] = std::sin(rad);
            cos_v[i] = std::cos(rad);
        }
    }
};
const SinCos& tables() {
    static const SinCos t;
    return t;
}

inline int floor_div(int a, int b) {
    int q = a / b;
    int r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

// a - b wrapped into [-128, 127].
inline int signed_angle_delta(std::uint8_t a, std::uint8_t b) {
    int d = static_cast<int>(a) - static_cast<int>(b);
    if (d < -128) d += 256;
    if (d > 127) d -= 256;
    return d;
}

// Gallery minutiae bucket-sorted by angle into 32 buckets of 8 units, laid
// out as parallel arrays so a +-tolerance angle window walks contiguous
// memory. `order` maps a slot back to the original minutia index.
struct AngleShards {
    std::array<std::uint32_t, 33> start{};  // bucket b occupies [start[b], start[b+1])
    std::vector<std::uint16_t> order;
    std::vector<std::uint8_t> angles;  // bucket-sorted copies
    std::vector<double> xs, ys;

    void build(const std::vector<Minutia>& ms) {
        const std::size_t n = ms.size();
        order.resize(n);
        angles.resize(n);
        xs.resize(n);
        ys.resize(n);
        start.fill(0);
        for (const Minutia& m : ms) ++start[(m.angle >> 3) + 1];
        for (int b = 0; b < 32; ++b) start[b + 1] += start[b];
        std::array<std::uint32_t, 32> cursor{};
        for (int b = 0; b < 32; ++b) cursor[b] = start[b];
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t slot = cursor[ms[i].angle >> 3]++;
            order[slot] = static_cast<std::uint16_t>(i);
            angles[slot] = ms[i].angle;
            xs[slot] = ms[i].x;
            ys[slot] = ms[i].y;
        }
    }

    // Visits every slot whose bucket overlaps [target-tol, target+tol]; the
    // caller still applies the exact angle test per slot.
    template <typename Fn>
    void for_each_near(int target_angle, int tolerance, Fn&& fn) const {
        int lo = target_angle - tolerance;
        int hi = target_angle + tolerance;
        int first = floor_div(lo, 8);
        int last = floor_div(hi, 8);
        if (last - first >= 32) {
            first = 0;
            last = 31;
        }
        for (int b = first; b <= last; ++b) {
            int wb = b & 31;
            for (std::uint32_t k = start[wb]; k < start[wb + 1]; ++k) fn(k);
        }
    }
};

struct Cell {
    std::int32_t count = 0;
    double sum_dx = 0.0;
    double sum_dy = 0.0;
    std::int64_t sum_dt = 0;
};

// Absolute bin coordinates packed into one comparable id, identical for the
// dense and sparse accumulator paths.
inline std::uint64_t pack_bins(int bx, int by, int bt) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(bx + 32768)) << 40) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(by + 32768)) << 16) |
           static_cast<std::uint16_t>(bt + 128);
}

// Dense vote counter reused across calls; a generation stamp shares the slot
// word with the count so stale cells read as empty without any clearing.
struct DenseAccum {
    std::vector<std::uint64_t> slot;  // [generation:32 | count:32]
    std::vector<std::uint32_t> touched;
    std::uint32_t gen = 0;

    void prepare(std::size_t n) {
        if (slot.size() < n) slot.resize(n, 0);
        touched.clear();
        ++gen;
    }

    void bump(std::size_t i) {
        std::uint64_t v = slot[i];
        if ((v >> 32) != gen) {
            v = static_cast<std::uint64_t>(gen) << 32;
            touched.push_back(static_cast<std::uint32_t>(i));
        }
        slot[i] = v + 1;
    }

    std::uint32_t count(std::size_t i) const { return static_cast<std::uint32_t>(slot[i]); }
};

// One vote as appended to the sequential log; exact offsets are re-summed
// from here for peak cells only. Coordinates are < 2^14 so float is exact
// enough (the vote means get rounded to whole pixels anyway).
struct VoteRec {
    std::uint32_t idx;
    float dx, dy;
    std::int16_t dt;
};

thread_local DenseAccum t_accum;
thread_local std::vector<VoteRec> t_votes;
thread_local AngleShards t_shards;

struct Candidate {
    int dx;
    int dy;
    int dt;  // signed
    std::int64_t count;
    std::uint64_t cell_id;
};

// Total order: most votes first, then the smallest (|dx|+|dy|, dtheta mod
// 256), then dx, dy, and finally the cell id as an arbiter.
bool better(const Candidate& a, const Candidate& b) {
    if (a.count != b.count) return a.count > b.count;
    long long ma = std::llabs(static_cast<long long>(a.dx)) + std::llabs(static_cast<long long>(a.dy));
    long long mb = std::llabs(static_cast<long long>(b.dx)) + std::llabs(static_cast<long long>(b.dy));
    if (ma != mb) return ma < mb;
    int at = a.dt & 255;
    int bt = b.dt & 255;
    if (at != bt) return at < bt;
    if (a.dx != b.dx) return a.dx < b.dx;
    if (a.dy != b.dy) return a.dy < b.dy;
    return a.cell_id < b.cell_id;
}

Candidate to_candidate(const Cell& c, std::uint64_t cell_id) {
    Candidate cand;
    cand.count = c.count;
    cand.dx = static_cast<int>(std::llround(c.sum_dx / c.count));
    cand.dy = static_cast<int>(std::llround(c.sum_dy / c.count));
    cand.dt = static_cast<int>(std::llround(static_cast<double>(c.sum_dt) / c.count));
    cand.cell_id = cell_id;
    return cand;
}

// Core Hough vote over a prebuilt shard index; public entry points share it
// so match_score can reuse one gallery index for both phases.
Alignment align_with_shards(const MinutiaTemplate& probe, const MinutiaTemplate& gallery,
                            const MatcherParams& params, const AngleShards& shards) {
    const auto& sc = tables();
    const int tol = params.angle_tolerance;

    // Coordinate bounds of the vote space. Rotations are capped at the angle
    // tolerance, so a rotated gallery point moves at most sin(tol) of the
    // cross extent off axis; 0.3827 covers the default 22.5 degrees and
    // anything below 90 is covered by using 1.0 when the tolerance is larger.
    double s_max = (tol >= 64) ? 1.0 : std::abs(std::sin(kTwoPi * tol / 256.0));
    int gx_max = 0, gy_max = 0, px_max = 0, py_max = 0;
    for (const Minutia& m : gallery.minutiae) {
        gx_max = std::max(gx_max, static_cast<int>(m.x));
        gy_max = std::max(gy_max, static_cast<int>(m.y));
    }
    for (const Minutia& m : probe.minutiae) {
        px_max = std::max(px_max, static_cast<int>(m.x));
        py_max = std::max(py_max, static_cast<int>(m.y));
    }
    int slack_x = static_cast<int>(s_max * gy_max) + 2;
    int slack_y = static_cast<int>(s_max * gx_max) + 2;
    int dx_min = -(gx_max + slack_x), dx_max = px_max + slack_x;
    int dy_min = -(gy_max + slack_y), dy_max = py_max + slack_y;

    int bx_min = floor_div(dx_min, params.bin_dx), bx_max = floor_div(dx_max, params.bin_dx);
    int by_min = floor_div(dy_min, params.bin_dy), by_max = floor_div(dy_max, params.bin_dy);
    int bt_min = floor_div(-tol, params.bin_dtheta), bt_max = floor_div(tol, params.bin_dtheta);
    std::size_t nx = static_cast<std::size_t>(bx_max - bx_min + 1);
    std::size_t ny = static_cast<std::size_t>(by_max - by_min + 1);
    std::size_t nt = static_cast<std::size_t>(bt_max - bt_min + 1);
    std::size_t n_cells = nx * ny * nt;

    const double inv_bx = 1.0 / params.bin_dx;
    const double inv_by = 1.0 / params.bin_dy;

    // dt in [-128, 127] -> accumulator theta bin, computed without a divide.
    std::array<std::int8_t, 256> bt_table;
    for (int dt = -128; dt <= 127; ++dt)
        bt_table[static_cast<std::size_t>(dt + 128)] =
            static_cast<std::int8_t>(floor_div(dt, params.bin_dtheta));

    bool found = false;
    Candidate best{};

    auto vote_loop = [&](auto&& vote) {
        for (const Minutia& p : probe.minutiae) {
            const double px = p.x, py = p.y;
            const int pa = p.angle;
            shards.for_each_near(pa, tol, [&](std::uint32_t k) {
                if (circular_angle_diff(static_cast<std::uint8_t>(pa), shards.angles[k]) > tol)
                    return;
                int dt = signed_angle_delta(static_cast<std::uint8_t>(pa), shards.angles[k]);
                int a = dt & 255;
                double gx = sc.cos_v[a] * shards.xs[k] - sc.sin_v[a] * shards.ys[k];
                double gy = sc.sin_v[a] * shards.xs[k] + sc.cos_v[a] * shards.ys[k];
                double dx = px - gx;
                double dy = py - gy;
                int bx = static_cast<int>(std::floor(dx * inv_bx));
                int by = static_cast<int>(std::floor(dy * inv_by));
                int bt = bt_table[static_cast<std::size_t>(dt + 128)];
                vote(bx, by, bt, dx, dy, dt);
            });
        }
    };

    // Dense path for normally sized templates, hash map fallback for huge
    // coordinate spans. Both feed the same comparator over the same packed
    // cell ids, so they agree on the peak.
    if (n_cells <= (std::size_t{1} << 22)) {
        t_accum.prepare(n_cells);
        t_votes.clear();
        vote_loop([&](int bx, int by, int bt, double dx, double dy, int dt) {
            std::size_t idx = (static_cast<std::size_t>(bx - bx_min) * ny +
                               static_cast<std::size_t>(by - by_min)) *
                                  nt +
                              static_cast<std::size_t>(bt - bt_min);
            t_accum.bump(idx);
            t_votes.push_back({static_cast<std::uint32_t>(idx), static_cast<float>(dx),
                               static_cast<float>(dy), static_cast<std::int16_t>(dt)});
        });
        // Only cells tying the maximum vote count can win; their offset sums
        // are recovered from the vote log, so sub-peak cells cost nothing
        // beyond their count.
        std::uint32_t max_count = 0;
        for (std::uint32_t idx : t_accum.touched)
            max_count = std::max(max_count, t_accum.count(idx));
        auto consider = [&](std::uint32_t idx, const Cell& c) {
            std::size_t rem = idx;
            int bt = static_cast<int>(rem % nt) + bt_min;
            rem /= nt;
            int by = static_cast<int>(rem % ny) + by_min;
            int bx = static_cast<int>(rem / ny) + bx_min;
            Candidate cand = to_candidate(c, pack_bins(bx, by, bt));
            if (!found || better(cand, best)) {
                best = cand;
                found = true;
            }
        };
        if (max_count == 1) {
            // Every vote owns its cell, so each log entry is a candidate.
            for (const VoteRec& v : t_votes)
                consider(v.idx, Cell{1, v.dx, v.dy, v.dt});
        } else {
            static thread_local std::vector<std::uint32_t> winners;
            static thread_local std::vector<Cell> sums;
            winners.clear();
            for (std::uint32_t idx : t_accum.touched)
                if (t_accum.count(idx) == max_count) winners.push_back(idx);
            std::sort(winners.begin(), winners.end());
            sums.assign(winners.size(), Cell{});
            for (const VoteRec& v : t_votes) {
                auto it = std::lower_bound(winners.begin(), winners.end(), v.idx);
                if (it == winners.end() || *it != v.idx) continue;
                Cell& c = sums[static_cast<std::size_t>(it - winners.begin())];
                ++c.count;
                c.sum_dx += v.dx;
                c.sum_dy += v.dy;
                c.sum_dt += v.dt;
            }
            for (std::size_t i = 0; i < winners.size(); ++i) consider(winners[i], sums[i]);
        }
    } else {
        std::unordered_map<std::uint64_t, Cell> cells;
        cells.reserve(probe.minutiae.size() * 4);
        vote_loop([&](int bx, int by, int bt, double dx, double dy, int dt) {
            Cell& c = cells[pack_bins(bx, by, bt)];
            ++c.count;
            c.sum_dx += dx;
            c.sum_dy += dy;
            c.sum_dt += dt;
        });
        std::int32_t max_count = 0;
        for (const auto& [id, c] : cells) max_count = std::max(max_count, c.count);
        for (const auto& [id, c] : cells) {
            if (c.count != max_count) continue;
            Candidate cand = to_candidate(c, id);
            if (!found || better(cand, best)) {
                best = cand;
                found = true;
            }
        }
    }

    if (!found) return Alignment{0, 0, 0, 0};
    return Alignment{best.dx, best.dy, best.dt & 255, best.count};
}

}  // namespace

void validate(const MatcherParams& p) {
    if (!(p.distance_tolerance > 0.0)) throw ConfigError("distance_tolerance must be positive");
    if (p.angle_tolerance <= 0 || p.angle_tolerance > 128)
        throw ConfigError("angle_tolerance must be in 1..128");
    if (p.bin_dx <= 0 || p.bin_dy <= 0 || p.bin_dtheta <= 0)
        throw ConfigError("alignment bin widths must be positive");
    if (!(p.score_scale > 0.0)) throw ConfigError("score_scale must be positive");
}

int circular_angle_diff(std::uint8_t a, std::uint8_t b) {
    int d = std::abs(static_cast<int>(a) - static_cast<int>(b));
    return std::min(d, 256 - d);
}

Alignment estimate_alignment(const MinutiaTemplate& probe, const MinutiaTemplate& gallery,
                             const MatcherParams& params) {
    if (probe.minutiae.empty() || gallery.minutiae.empty())
        throw MatcherError("estimate_alignment needs nonempty templates");
    t_shards.build(gallery.minutiae);
    return align_with_shards(probe, gallery, params, t_shards);
}

double match_score(const MinutiaTemplate& probe, const MinutiaTemplate& gallery,
                   const MatcherParams& params) {
    const std::size_t np = probe.minutiae.size();
    const std::size_t ng = gallery.minutiae.size();
    if (np == 0 || ng == 0) return 0.0;

    AngleShards& shards = t_shards;
    shards.build(gallery.minutiae);
    Alignment align = align_with_shards(probe, gallery, params, shards);

    const auto& sc = tables();
    const int a = align.dtheta & 255;
    const double cos_t = sc.cos_v[a], sin_t = sc.sin_v[a];
    const double tol2 = params.distance_tolerance * params.distance_tolerance;
    const int tol_angle = params.angle_tolerance;

    // Gallery in the probe frame, in shard slot order.
    std::vector<double> gx(ng), gy(ng);
    for (std::size_t k = 0; k < ng; ++k) {
        gx[k] = cos_t * shards.xs[k] - sin_t * shards.ys[k] + align.dx;
        gy[k] = sin_t * shards.xs[k] + cos_t * shards.ys[k] + align.dy;
    }

    struct Pair {
        double d2;
        std::uint32_t pi;
        std::uint32_t gk;  // shard slot, a per-call-stable gallery identity
    };
    std::vector<Pair> candidates;
    candidates.reserve(np * 4);

    for (std::size_t pi = 0; pi < np; ++pi) {
        const Minutia& p = probe.minutiae[pi];
        // The transformed gallery angle is g.angle + dtheta, so compare
        // against p.angle - dtheta on the original shards.
        int target = (static_cast<int>(p.angle) - a) & 255;
        shards.for_each_near(target, tol_angle, [&](std::uint32_t k) {
            if (circular_angle_diff(static_cast<std::uint8_t>(target), shards.angles[k]) >
                tol_angle)
                return;
            double ddx = p.x - gx[k];
            double ddy = p.y - gy[k];
            double d2 = ddx * ddx + ddy * ddy;
            if (d2 <= tol2) candidates.push_back({d2, static_cast<std::uint32_t>(pi), k});
        });
    }

    std::sort(candidates.begin(), candidates.end(), [](const Pair& x, const Pair& y) {
        if (x.d2 != y.d2) return x.d2 < y.d2;
        if (x.pi != y.pi) return x.pi < y.pi;
        return x.gk < y.gk;
    });

    std::vector<std::uint8_t> used_p(np, 0), used_g(ng, 0);
    std::size_t m = 0;
    for (const Pair& c : candidates) {
        if (used_p[c.pi] || used_g[c.gk]) continue;
        used_p[c.pi] = used_g[c.gk] = 1;
        ++m;
    }

    return params.score_scale * (static_cast<double>(m) * static_cast<double>(m)) /
           (static_cast<double>(np) * static_cast<double>(ng));
}

}  // namespace phalanx
