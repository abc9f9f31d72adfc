#include <benchmark/benchmark.h>

#include <vector>

#include "phalanx/evaluation.hpp"
#include "phalanx/fusion.hpp"
#include "phalanx/matcher.hpp"
#include "phalanx/rng.hpp"
#include "phalanx/synthetic.hpp"

using namespace phalanx;

namespace {

// Two impressions of one finger at the given phalanx, drawn from the stock
// generator so the benchmark tracks real template statistics.
std::pair<MinutiaTemplate, MinutiaTemplate> impression_pair(int phalanx_no) {
    SynthConfig cfg = default_synth_config();
    cfg.n_subjects = 1;
    GeneratedDataset ds = generate_dataset(cfg);
    std::vector<const MinutiaTemplate*> found;
    for (std::size_t i = 0; i < ds.manifest.size(); ++i) {
        const ManifestEntry& e = ds.manifest.entry(i);
        if (phalanx_number(e.phalanx) == phalanx_no && e.finger == Finger::index &&
            e.hand == Hand::left)
            found.push_back(&ds.templates[i]);
    }
    return {*found[0], *found[1]};
}

void BM_MatchScoreDistal(benchmark::State& state) {
    auto [a, b] = impression_pair(1);
    for (auto _ : state) benchmark::DoNotOptimize(match_score(a, b));
}
BENCHMARK(BM_MatchScoreDistal);

void BM_MatchScoreProximal(benchmark::State& state) {
    auto [a, b] = impression_pair(3);
    for (auto _ : state) benchmark::DoNotOptimize(match_score(a, b));
}
BENCHMARK(BM_MatchScoreProximal);

void BM_EstimateAlignment(benchmark::State& state) {
    auto [a, b] = impression_pair(2);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_alignment(a, b));
}
BENCHMARK(BM_EstimateAlignment);

void BM_RocCurve(benchmark::State& state) {
    Rng rng(42);
    std::vector<double> genuine(4800), imposter(100000);
    for (double& s : genuine) s = 40.0 + rng.gaussian(0.0, 12.0);
    for (double& s : imposter) s = 3.0 + rng.uniform_unit() * 6.0;
    for (auto _ : state) benchmark::DoNotOptimize(roc_curve(genuine, imposter));
}
BENCHMARK(BM_RocCurve);

void BM_ClopperPearson(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(clopper_pearson(4613, 4800, 0.95));
}
BENCHMARK(BM_ClopperPearson);

void BM_FuseQuality(benchmark::State& state) {
    WeightPolicy policy = make_quality_policy();
    ScoreTable table;
    table.ids = {"a", "b"};
    FusionSet set;
    set.trial_id = "a~b~i1j2";
    set.genuine = true;
    for (int i = 0; i < 6; ++i) {
        ScoreRecord r;
        r.probe_ref = 0;
        r.gallery_ref = 1;
        r.score = 10.0 * i;
        r.nfiq_probe = static_cast<std::uint8_t>(1 + (i % 5));
        r.nfiq_gallery = static_cast<std::uint8_t>(1 + ((i + 2) % 5));
        r.phalanx = static_cast<Phalanx>(1 + (i % 3));
        r.genuine = true;
        table.records.push_back(r);
        set.members.push_back({static_cast<std::uint32_t>(i),
                               static_cast<Finger>(i % 2), static_cast<Phalanx>(1 + (i % 3))});
    }
    for (auto _ : state) benchmark::DoNotOptimize(fuse(set, policy, table));
}
BENCHMARK(BM_FuseQuality);

}  // namespace

BENCHMARK_MAIN();
