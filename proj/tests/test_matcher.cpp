#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "phalanx/matcher.hpp"
#include "phalanx/rng.hpp"

using namespace phalanx;

namespace {

MinutiaTemplate blank(std::uint16_t w = 320, std::uint16_t h = 480) {
    MinutiaTemplate t;
    t.header.image_width = w;
    t.header.image_height = h;
    t.header.resolution_x = t.header.resolution_y = 197;
    t.header.finger_position = 1;
    t.header.impression_number = 1;
    t.nfiq = 3;
    return t;
}

void add(MinutiaTemplate& t, int x, int y, int angle, MinutiaType type = MinutiaType::ridge_ending) {
    Minutia m;
    m.x = static_cast<std::uint16_t>(x);
    m.y = static_cast<std::uint16_t>(y);
    m.angle = static_cast<std::uint8_t>(angle & 255);
    m.type = type;
    m.quality = 70;
    t.minutiae.push_back(m);
}

// A scattered cloud with no two points closer than min_gap, so greedy pairing
// under a translated copy stays unambiguous.
MinutiaTemplate scatter(Rng& rng, int n, int w = 320, int h = 480, double min_gap = 24.0) {
    MinutiaTemplate t = blank(static_cast<std::uint16_t>(w), static_cast<std::uint16_t>(h));
    int guard = 0;
    while (static_cast<int>(t.minutiae.size()) < n && ++guard < 40000) {
        int x = static_cast<int>(rng.uniform_int(30, static_cast<std::uint64_t>(w - 31)));
        int y = static_cast<int>(rng.uniform_int(30, static_cast<std::uint64_t>(h - 31)));
        bool ok = true;
        for (const Minutia& m : t.minutiae) {
            double dx = m.x - x, dy = m.y - y;
            if (dx * dx + dy * dy < min_gap * min_gap) {
                ok = false;
                break;
            }
        }
        if (ok) add(t, x, y, static_cast<int>(rng.uniform_int(0, 255)));
    }
    REQUIRE(static_cast<int>(t.minutiae.size()) == n);
    return t;
}

}  // namespace

TEST_CASE("circular angle difference wraps at 256") {
    CHECK(circular_angle_diff(0, 0) == 0);
    CHECK(circular_angle_diff(10, 250) == 16);
    CHECK(circular_angle_diff(250, 10) == 16);
    CHECK(circular_angle_diff(0, 128) == 128);
    CHECK(circular_angle_diff(255, 0) == 1);
    CHECK(circular_angle_diff(64, 32) == 32);
}

TEST_CASE("parameter validation rejects non-positive knobs") {
    MatcherParams p;
    CHECK_NOTHROW(validate(p));
    p.distance_tolerance = 0;
    CHECK_THROWS_AS(validate(p), ConfigError);
    p = {};
    p.angle_tolerance = 0;
    CHECK_THROWS_AS(validate(p), ConfigError);
    p = {};
    p.angle_tolerance = 129;
    CHECK_THROWS_AS(validate(p), ConfigError);
    p = {};
    p.bin_dx = 0;
    CHECK_THROWS_AS(validate(p), ConfigError);
    p = {};
    p.bin_dtheta = -1;
    CHECK_THROWS_AS(validate(p), ConfigError);
    p = {};
    p.score_scale = 0;
    CHECK_THROWS_AS(validate(p), ConfigError);
}

TEST_CASE("identical templates score exactly the scale and align at identity") {
    Rng rng(7);
    MinutiaTemplate t = scatter(rng, 40);
    Alignment a = estimate_alignment(t, t);
    CHECK(a.dx == 0);
    CHECK(a.dy == 0);
    CHECK(a.dtheta == 0);
    CHECK(a.votes >= 40);
    CHECK(match_score(t, t) == 100.0);

    MatcherParams half;
    half.score_scale = 50.0;
    CHECK(match_score(t, t, half) == 50.0);
}

TEST_CASE("a pure translation is recovered with the opposite sign") {
    Rng rng(11);
    MinutiaTemplate probe = scatter(rng, 35, 280, 420);
    // Gallery shifted by (+20, -12): gallery = probe + (20, -12), so mapping
    // gallery into the probe frame needs (-20, +12, 0).
    MinutiaTemplate gallery = blank();
    for (const Minutia& m : probe.minutiae) {
        Minutia g = m;
        g.x = static_cast<std::uint16_t>(g.x + 20);
        g.y = static_cast<std::uint16_t>(g.y - 12);
        gallery.minutiae.push_back(g);
    }
    Alignment a = estimate_alignment(probe, gallery);
    CHECK(a.dtheta == 0);
    // The vote centroid lands within one bin of the true offset.
    CHECK(std::abs(a.dx - (-20)) <= 10);
    CHECK(std::abs(a.dy - 12) <= 10);
    CHECK(a.votes >= 35);
    CHECK(match_score(probe, gallery) == 100.0);
}

TEST_CASE("single incompatible pair yields the zero-vote identity") {
    MinutiaTemplate probe = blank(), gallery = blank();
    add(probe, 100, 100, 0);
    add(gallery, 100, 100, 128);  // opposite direction, outside any tolerance
    Alignment a = estimate_alignment(probe, gallery);
    CHECK(a.dx == 0);
    CHECK(a.dy == 0);
    CHECK(a.dtheta == 0);
    CHECK(a.votes == 0);
    CHECK(match_score(probe, gallery) == 0.0);
}

TEST_CASE("empty templates: score 0, alignment refuses") {
    MinutiaTemplate e = blank();
    MinutiaTemplate f = blank();
    add(f, 50, 50, 0);
    CHECK(match_score(e, f) == 0.0);
    CHECK(match_score(f, e) == 0.0);
    CHECK(match_score(e, e) == 0.0);
    CHECK_THROWS_AS(estimate_alignment(e, f), MatcherError);
    CHECK_THROWS_AS(estimate_alignment(f, e), MatcherError);
}

TEST_CASE("scores are deterministic and inside [0, scale]") {
    Rng rng(1234);
    for (int trial = 0; trial < 50; ++trial) {
        MinutiaTemplate a = scatter(rng, 10 + static_cast<int>(rng.uniform_int(0, 50)), 320, 480,
                                    8.0);
        MinutiaTemplate b = scatter(rng, 10 + static_cast<int>(rng.uniform_int(0, 50)), 320, 480,
                                    8.0);
        double s1 = match_score(a, b);
        double s2 = match_score(a, b);
        CHECK(s1 == s2);
        CHECK(s1 >= 0.0);
        CHECK(s1 <= 100.0);
    }
}

TEST_CASE("score degrades monotonically as jitter grows") {
    // Mean over many fingers: jittered copies at sigma 1 / 5 / 9 px. Sigma 1
    // sits fully inside the 15 px pairing tolerance; 5 and 9 push a growing
    // share of displacements past it.
    Rng rng(99);
    double mean[3] = {0, 0, 0};
    const double sigmas[3] = {1.0, 5.0, 9.0};
    const int fingers = 120;
    for (int f = 0; f < fingers; ++f) {
        MinutiaTemplate master = scatter(rng, 45);
        for (int si = 0; si < 3; ++si) {
            MinutiaTemplate moved = blank();
            for (const Minutia& m : master.minutiae) {
                Minutia j = m;
                double nx = m.x + rng.gaussian(0.0, sigmas[si]);
                double ny = m.y + rng.gaussian(0.0, sigmas[si]);
                j.x = static_cast<std::uint16_t>(std::clamp<long>(std::lround(nx), 0, 319));
                j.y = static_cast<std::uint16_t>(std::clamp<long>(std::lround(ny), 0, 479));
                moved.minutiae.push_back(j);
            }
            mean[si] += match_score(master, moved) / fingers;
        }
    }
    CHECK(mean[0] > mean[1]);
    CHECK(mean[1] > mean[2]);
    CHECK(mean[0] > 90.0);  // sigma 1 is nearly lossless
}

TEST_CASE("genuine pairs outscore imposter pairings on average") {
    Rng rng(2024);
    double genuine_sum = 0.0, imposter_sum = 0.0;
    int genuine_n = 0, imposter_n = 0;
    std::vector<MinutiaTemplate> firsts;
    for (int f = 0; f < 20; ++f) {
        MinutiaTemplate master = scatter(rng, 40, 320, 480, 12.0);
        MinutiaTemplate imp[2];
        for (int i = 0; i < 2; ++i) {
            imp[i] = blank();
            for (const Minutia& m : master.minutiae) {
                if (rng.uniform_unit() <= 0.10) continue;  // drop-outs
                Minutia j = m;
                double nx = m.x + rng.gaussian(0.0, 3.0);
                double ny = m.y + rng.gaussian(0.0, 3.0);
                j.x = static_cast<std::uint16_t>(std::clamp<long>(std::lround(nx), 0, 319));
                j.y = static_cast<std::uint16_t>(std::clamp<long>(std::lround(ny), 0, 479));
                imp[i].minutiae.push_back(j);
            }
            int spurious = static_cast<int>(rng.poisson(4.0));
            for (int s = 0; s < spurious; ++s) {
                add(imp[i], static_cast<int>(rng.uniform_int(0, 319)),
                    static_cast<int>(rng.uniform_int(0, 479)),
                    static_cast<int>(rng.uniform_int(0, 255)));
            }
        }
        genuine_sum += match_score(imp[0], imp[1]);
        ++genuine_n;
        firsts.push_back(imp[0]);
    }
    for (std::size_t i = 0; i < firsts.size(); ++i)
        for (std::size_t j = 0; j < firsts.size(); ++j) {
            if (i == j) continue;
            imposter_sum += match_score(firsts[i], firsts[j]);
            ++imposter_n;
        }
    double genuine_mean = genuine_sum / genuine_n;
    double imposter_mean = imposter_sum / imposter_n;
    CHECK(genuine_mean > 5.0 * imposter_mean);
    CHECK(genuine_mean > 20.0);
    CHECK(imposter_mean < 10.0);
}

TEST_CASE("rotation within tolerance is absorbed by alignment") {
    Rng rng(31);
    MinutiaTemplate probe = scatter(rng, 30, 300, 300, 20.0);
    const double cx = 149.5, cy = 149.5;
    const int rot = 12;  // angle units, inside the +-16 default window
    const double rad = rot * 2.0 * 3.14159265358979323846 / 256.0;
    MinutiaTemplate gallery = blank(300, 300);
    for (const Minutia& m : probe.minutiae) {
        // Gallery is the probe rotated by -rot about the centre, so mapping
        // gallery -> probe needs a +rot rotation.
        double dx = m.x - cx, dy = m.y - cy;
        double gx = cx + std::cos(-rad) * dx - std::sin(-rad) * dy;
        double gy = cy + std::sin(-rad) * dx + std::cos(-rad) * dy;
        Minutia g = m;
        g.x = static_cast<std::uint16_t>(std::clamp<long>(std::lround(gx), 0, 299));
        g.y = static_cast<std::uint16_t>(std::clamp<long>(std::lround(gy), 0, 299));
        g.angle = static_cast<std::uint8_t>((m.angle - rot) & 255);
        gallery.minutiae.push_back(g);
    }
    Alignment a = estimate_alignment(probe, gallery);
    CHECK(circular_angle_diff(static_cast<std::uint8_t>(a.dtheta), static_cast<std::uint8_t>(rot)) <=
          8);
    double s = match_score(probe, gallery);
    CHECK(s > 80.0);
}

TEST_CASE("disjoint angle populations cannot pair after alignment") {
    // Probe angles all 0, gallery angles all 64: no compatible vote pairs and
    // no pairable minutiae under the default 16-unit tolerance.
    MinutiaTemplate probe = blank(), gallery = blank();
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        add(probe, static_cast<int>(rng.uniform_int(10, 300)),
            static_cast<int>(rng.uniform_int(10, 460)), 0);
        add(gallery, static_cast<int>(rng.uniform_int(10, 300)),
            static_cast<int>(rng.uniform_int(10, 460)), 64);
    }
    CHECK(estimate_alignment(probe, gallery).votes == 0);
    CHECK(match_score(probe, gallery) == 0.0);
}
