#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "phalanx/pipeline.hpp"

#include "test_util.hpp"

using namespace phalanx;

namespace {

// Small but complete pipeline input: 2 subjects, 2 fingers, 2 impressions.
RunConfig small_run(const std::filesystem::path& out) {
    RunConfig c;
    SynthConfig s = default_synth_config();
    s.n_subjects = 2;
    s.fingers_per_hand = 2;
    s.impressions = 2;
    s.seed = 515253;
    c.synth = s;
    c.out_dir = out;
    c.far_targets = {0.25, 1e-6};
    return c;
}

ScenarioSpec raw_scenario(std::string name, std::vector<Finger> fingers, Phalanx ph) {
    ScenarioSpec sc;
    sc.name = std::move(name);
    sc.fingers = std::move(fingers);
    sc.phalanges = {ph};
    sc.fuse_fingers = false;
    return sc;
}

ScenarioSpec fused_scenario(std::string name, std::vector<Finger> fingers,
                            std::vector<Phalanx> phalanges, WeightPolicy policy,
                            bool fuse_fingers) {
    ScenarioSpec sc;
    sc.name = std::move(name);
    sc.fingers = std::move(fingers);
    sc.phalanges = std::move(phalanges);
    sc.policy = std::move(policy);
    sc.fuse_fingers = fuse_fingers;
    return sc;
}

double report_eer(const std::filesystem::path& report) {
    auto doc = nlohmann::json::parse(testutil::read_text(report));
    return doc.at("eer").get<double>();
}

}  // namespace

TEST_CASE("presets expand to the documented scenario families") {
    auto s1 = expand_preset("scenario1_single_phalanx");
    REQUIRE(s1.size() == 3);
    CHECK(s1[0].name == "phalanx1");
    CHECK(s1[2].name == "phalanx3");
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK_FALSE(s1[i].policy.has_value());
        CHECK(s1[i].fingers.size() == 4);
        REQUIRE(s1[i].phalanges.size() == 1);
        CHECK(phalanx_number(s1[i].phalanges[0]) == static_cast<int>(i) + 1);
    }

    auto s2 = expand_preset("scenario2_multiphalanx");
    REQUIRE(s2.size() == 6);
    CHECK(s2[0].name == "multiphalanx_p23_quality");
    CHECK(s2[1].name == "multiphalanx_p23_simple");
    CHECK(s2[2].name == "multiphalanx_p23_static");
    CHECK(s2[5].name == "multiphalanx_p123_static");
    CHECK(s2[2].policy->kind == FusionPolicy::static_weight);
    CHECK(s2[2].policy->static_weights.at(Phalanx::middle) == 0.7);
    CHECK(s2[5].policy->static_weights.at(Phalanx::distal) == 0.5);
    for (const auto& sc : s2) CHECK_FALSE(sc.fuse_fingers);

    auto s3a = expand_preset("scenario3a_two_finger");
    REQUIRE(s3a.size() == 3);
    CHECK(s3a[0].name == "two_finger_index_middle");
    CHECK(s3a[0].fingers == std::vector<Finger>{Finger::index, Finger::middle});
    CHECK(s3a[0].fuse_fingers);
    CHECK(s3a[0].policy->kind == FusionPolicy::static_weight);

    auto s3b = expand_preset("scenario3b_multi_finger");
    REQUIRE(s3b.size() == 2);
    CHECK(s3b[1].fingers.size() == 4);

    CHECK_THROWS_AS(expand_preset("scenario9"), ConfigError);
}

TEST_CASE("run config validation catches structural mistakes") {
    auto broken = [](auto mutate) {
        RunConfig c = small_run("x");
        c.scenarios = {raw_scenario("ok", {Finger::index}, Phalanx::middle)};
        mutate(c);
        CHECK_THROWS_AS(validate(c), ConfigError);
    };
    broken([](RunConfig& c) { c.synth.reset(); });  // no source
    broken([](RunConfig& c) { c.manifest_path = "m.json"; });  // two sources
    broken([](RunConfig& c) { c.scenarios.clear(); });
    broken([](RunConfig& c) { c.jobs = -1; });
    broken([](RunConfig& c) { c.far_targets = {0.0}; });
    broken([](RunConfig& c) { c.far_targets = {1.5}; });
    broken([](RunConfig& c) { c.far_targets.clear(); });
    broken([](RunConfig& c) { c.scenarios.push_back(c.scenarios.front()); });  // dup name
    broken([](RunConfig& c) { c.scenarios.front().name = "bad name"; });
    broken([](RunConfig& c) { c.scenarios.front().name = ""; });
    broken([](RunConfig& c) { c.scenarios.front().fingers = {}; });
    broken([](RunConfig& c) {
        c.scenarios.front().fingers = {Finger::index, Finger::index};
    });
    broken([](RunConfig& c) { c.scenarios.front().fingers = {Finger::thumb}; });
    broken([](RunConfig& c) { c.scenarios.front().phalanges = {}; });
    broken([](RunConfig& c) {
        c.scenarios.front().phalanges = {Phalanx::middle, Phalanx::middle};
        c.scenarios.front().policy = make_simple_sum_policy();
    });
    // Raw evaluation is single-phalanx by definition.
    broken([](RunConfig& c) {
        c.scenarios.front().phalanges = {Phalanx::middle, Phalanx::proximal};
    });
    // Static weights must cover exactly the scenario's phalanges.
    broken([](RunConfig& c) {
        c.scenarios.front().phalanges = {Phalanx::middle, Phalanx::proximal};
        c.scenarios.front().policy =
            make_static_policy({{Phalanx::distal, 0.7}, {Phalanx::middle, 0.3}});
    });
    broken([](RunConfig& c) { c.matcher.bin_dtheta = 0; });
    broken([](RunConfig& c) { c.synth->n_subjects = 0; });
}

TEST_CASE("run config json: presets expand, overrides apply, junk is refused") {
    testutil::TempDir tmp;
    auto write = [&](const char* name, const std::string& text) {
        testutil::write_text(tmp.path / name, text);
        return tmp.path / name;
    };

    RunConfig c = run_config_from_json_file(write("ok.json", R"({
        "synth": {"n_subjects": 3, "fingers_per_hand": 2, "impressions": 2},
        "seed": 777,
        "matcher": {"distance_tolerance": 12.5, "bin_dtheta": 4},
        "presets": ["scenario1_single_phalanx"],
        "scenarios": [
            {"name": "extra", "fingers": ["index", "middle"], "phalanges": [2, 3],
             "policy": "static", "static_weights": {"2": 0.8, "3": 0.2},
             "fuse_fingers": true}
        ],
        "far_targets": [0.25, 0.001],
        "out_dir": "somewhere",
        "strict": true,
        "dedup_symmetric": true,
        "jobs": 3
    })"));
    CHECK(c.synth->n_subjects == 3);
    CHECK(c.synth->seed == 777);
    CHECK(c.matcher.distance_tolerance == 12.5);
    CHECK(c.matcher.bin_dtheta == 4);
    CHECK(c.matcher.bin_dx == 10);  // untouched default
    REQUIRE(c.scenarios.size() == 4);
    CHECK(c.scenarios[0].name == "phalanx1");
    CHECK(c.scenarios[3].name == "extra");
    CHECK(c.scenarios[3].policy->static_weights.at(Phalanx::middle) == 0.8);
    CHECK(c.far_targets == std::vector<double>{0.25, 0.001});
    CHECK(c.out_dir == std::filesystem::path("somewhere"));
    CHECK(c.strict);
    CHECK(c.dedup_symmetric);
    CHECK(c.jobs == 3);

    // Default static weights kick in when the key is absent.
    RunConfig d = run_config_from_json_file(write("dw.json", R"({
        "synth": {"n_subjects": 2},
        "scenarios": [{"name": "s", "fingers": ["ring"], "phalanges": [2, 3],
                       "policy": "static"}]
    })"));
    CHECK(d.scenarios[0].policy->static_weights.at(Phalanx::middle) == 0.7);

    CHECK_THROWS_AS(run_config_from_json_file(write("unk.json", R"({"synthetic": {}})")),
                    ConfigError);
    CHECK_THROWS_AS(run_config_from_json_file(write("seed.json",
                                                    R"({"manifest": "m.json", "seed": 3,
        "scenarios": [{"name": "s", "fingers": ["index"], "phalanges": [1]}]})")),
                    ConfigError);
    CHECK_THROWS_AS(run_config_from_json_file(write("mk.json", R"({
        "synth": {"n_subjects": 2}, "matcher": {"tolerance": 3},
        "scenarios": [{"name": "s", "fingers": ["index"], "phalanges": [1]}]})")),
                    ConfigError);
    CHECK_THROWS_AS(run_config_from_json_file(write("sw.json", R"({
        "synth": {"n_subjects": 2},
        "scenarios": [{"name": "s", "fingers": ["index"], "phalanges": [1],
                       "static_weights": {"1": 0.5}}]})")),
                    ConfigError);
    CHECK_THROWS_AS(run_config_from_json_file(write("sk.json", R"({
        "synth": {"n_subjects": 2},
        "scenarios": [{"name": "s", "fingers": ["index"], "phalanges": [1],
                       "rule": "x"}]})")),
                    ConfigError);
    CHECK_THROWS_AS(run_config_from_json_file(write("mal.json", "{")), ConfigError);
    CHECK_THROWS_AS(run_config_from_json_file(tmp.path / "absent.json"), ConfigError);
}

TEST_CASE("imported score files validate content beyond the csv schema") {
    std::filesystem::path data = PHALANX_TEST_DATA_DIR;
    ScoreTable t = import_scores(data / "import_small.csv");
    REQUIRE(t.records.size() == 3);
    REQUIRE(t.ids.size() == 3);
    // Ids intern in first-appearance order.
    CHECK(t.ids[0] == "a-1");
    CHECK(t.ids[1] == "a-2");
    CHECK(t.ids[2] == "b-1");
    CHECK(t.records[0].score == 73.25);
    CHECK(t.records[0].genuine);
    CHECK(t.records[0].probe_finger == Finger::index);
    CHECK(t.records[0].nfiq_probe == 2);
    CHECK(t.records[0].nfiq_gallery == 3);
    CHECK(t.records[2].score == 5.125);
    CHECK(t.records[2].phalanx == Phalanx::proximal);
    CHECK_FALSE(t.records[2].genuine);
    // The CSV carries the probe-side finger; both refs report it.
    CHECK(t.records[2].gallery_finger == t.records[2].probe_finger);

    testutil::TempDir tmp;
    const std::string header =
        "probe_id,gallery_id,finger,phalanx,genuine,score,nfiq_probe,nfiq_gallery\n";
    auto path = [&](const char* name, const std::string& text) {
        testutil::write_text(tmp.path / name, text);
        return tmp.path / name;
    };
    try {
        import_scores(path("nf.csv", header + "a,b,index,1,0,50.0,7,3\n"));
        FAIL_CHECK("expected range fault");
    } catch (const ProtocolError& e) {
        CHECK(e.fault() == ProtocolFault::range);
    }
    CHECK_THROWS_AS(import_scores(path("hi.csv", header + "a,b,index,1,0,150.0,3,3\n")),
                    ProtocolError);
    // ... unless the caller raises the score bound.
    CHECK(import_scores(path("hi2.csv", header + "a,b,index,1,0,150.0,3,3\n"), 200.0)
              .records.size() == 1);
    CHECK_THROWS_AS(import_scores(path("neg.csv", header + "a,b,index,1,0,-1.0,3,3\n")),
                    ProtocolError);
    CHECK(import_scores(path("empty.csv", header)).records.empty());
}

TEST_CASE("evaluate_channel bundles curve, eer and operating points") {
    std::vector<double> g = {3, 5, 7};
    std::vector<double> i = {1, 2, 4, 6};
    std::vector<double> targets = {0.25, 1e-6};
    ChannelEvaluation ev = evaluate_channel(g, i, targets);
    CHECK(ev.eer == doctest::Approx(7.0 / 24.0).epsilon(1e-12));
    REQUIRE(ev.operating_points.size() == 2);
    CHECK(ev.operating_points[0].attainable);
    CHECK(ev.operating_points[0].gar == doctest::Approx(2.0 / 3.0));
    // The top genuine score (7) outranks every imposter, so FAR 0 is reachable
    // at an observed threshold and even a 1e-6 target resolves there.
    CHECK(ev.operating_points[1].attainable);
    CHECK(ev.operating_points[1].threshold == 7.0);
    CHECK(ev.operating_points[1].gar == doctest::Approx(1.0 / 3.0));

    EvaluationMetadata meta;
    meta.scenario = "fixture";
    meta.policy = "none";
    std::string text = evaluation_report_text(meta, ev);
    CHECK(text == evaluation_report_text(meta, ev));  // byte-stable
    CHECK(text.back() == '\n');
    auto doc = nlohmann::json::parse(text);
    CHECK(doc.at("scenario") == "fixture");
    CHECK(doc.at("n_genuine") == 3);
    CHECK(doc.at("n_imposter") == 4);
    CHECK(doc.at("eer").get<double>() == doctest::Approx(0.291667));
    CHECK(doc.at("eer_percent").get<double>() == doctest::Approx(29.2));
    REQUIRE(doc.at("operating_points").size() == 2);
    const auto& op0 = doc.at("operating_points")[0];
    CHECK(op0.at("attainable") == true);
    CHECK(op0.at("gar").get<double>() == doctest::Approx(0.666667));
    CHECK(op0.at("gar_percent").get<double>() == doctest::Approx(66.7));
    CHECK(op0.at("ci_lower").is_number());
    const auto& op1 = doc.at("operating_points")[1];
    CHECK(op1.at("attainable") == true);
    CHECK(op1.at("gar").get<double>() == doctest::Approx(0.333333));
    CHECK(op1.at("threshold").get<double>() == 7.0);
    // Absent metadata stays out of the report.
    CHECK_FALSE(doc.contains("fingers"));
    CHECK_FALSE(doc.contains("static_weights"));
    CHECK_FALSE(doc.contains("dropped_trials"));
}

TEST_CASE("reports carry nulls for targets no threshold can meet") {
    // The best imposter outranks the only genuine score, so every threshold
    // accepts an imposter and FAR 0.1 (< 1/4) is out of reach.
    std::vector<double> g = {2.5};
    std::vector<double> i = {3, 4, 5, 6};
    ChannelEvaluation ev = evaluate_channel(g, i, std::vector<double>{0.1});
    REQUIRE(ev.operating_points.size() == 1);
    CHECK_FALSE(ev.operating_points[0].attainable);
    auto doc = nlohmann::json::parse(evaluation_report_text(EvaluationMetadata{}, ev));
    const auto& op = doc.at("operating_points")[0];
    CHECK(op.at("attainable") == false);
    CHECK(op.at("gar").is_null());
    CHECK(op.at("gar_percent").is_null());
    CHECK(op.at("threshold").is_null());
}

TEST_CASE("pipeline runs emit the full artifact tree and rerun byte-identically") {
    testutil::TempDir tmp;
    RunConfig c = small_run(tmp.path / "runA");
    c.scenarios = {
        raw_scenario("phalanx2", {Finger::index, Finger::middle}, Phalanx::middle),
        fused_scenario("both23_static", {Finger::index, Finger::middle},
                       {Phalanx::middle, Phalanx::proximal},
                       make_static_policy(default_static_weights(
                           std::vector<Phalanx>{Phalanx::middle, Phalanx::proximal})),
                       false),
        fused_scenario("hand23", {Finger::index, Finger::middle},
                       {Phalanx::middle, Phalanx::proximal}, make_quality_policy(), true),
    };
    run_pipeline(c);

    auto base = tmp.path / "runA";
    for (const char* rel :
         {"dataset/manifest.json", "scores/phalanx2.csv", "scores/phalanx3.csv",
          "scenarios/phalanx2/roc.csv", "scenarios/phalanx2/report.json",
          "scenarios/both23_static/fused.csv", "scenarios/both23_static/roc.csv",
          "scenarios/both23_static/report.json", "scenarios/hand23/fused.csv",
          "correlations.json", "run.lock.json"})
        CHECK(std::filesystem::exists(base / rel));
    // Raw scenarios have no fusion output.
    CHECK_FALSE(std::filesystem::exists(base / "scenarios/phalanx2/fused.csv"));
    // Distal phalanx was not needed by any scenario.
    CHECK_FALSE(std::filesystem::exists(base / "scores/phalanx1.csv"));

    // Counts: 16 templates per phalanx pool -> 240 ordered pairs, 16 genuine.
    ScoreTable t2 = read_score_csv(base / "scores/phalanx2.csv");
    CHECK(t2.records.size() == 240);
    std::int64_t genuine = 0;
    for (const auto& r : t2.records) genuine += r.genuine ? 1 : 0;
    CHECK(genuine == 16);

    auto lock = nlohmann::json::parse(testutil::read_text(base / "run.lock.json"));
    CHECK(lock.at("seed") == 515253);
    CHECK(lock.contains("config_hash"));
    CHECK(lock.contains("manifest_hash"));

    auto report = nlohmann::json::parse(
        testutil::read_text(base / "scenarios/both23_static/report.json"));
    CHECK(report.at("policy") == "static_weight");
    CHECK(report.at("static_weights").at("2").get<double>() == 0.7);
    CHECK(report.at("dropped_trials") == 0);
    CHECK(report.at("fuse_fingers") == false);
    // Per-finger trials on 2 fingers: 2x the per-hand trial count of each
    // hand-subject pairing; genuine (i != j): 8 VS... the cheap invariant is
    // n_genuine = 2 fingers x 2 hands x 2 subjects x 2 ordered impression
    // pairs = 16, imposters pair distinct virtual subjects of one finger.
    CHECK(report.at("n_genuine") == 16);

    RunConfig c2 = c;
    c2.out_dir = tmp.path / "runB";
    run_pipeline(c2);
    std::string diff;
    bool same = testutil::trees_identical(tmp.path / "runA", tmp.path / "runB", &diff);
    if (!same) FAIL_CHECK("first differing file: " << diff);
    CHECK(same);
}

TEST_CASE("a single-channel fused scenario evaluates exactly like the raw channel") {
    testutil::TempDir tmp;
    RunConfig c = small_run(tmp.path / "run");
    c.scenarios = {
        raw_scenario("idx2_raw", {Finger::index}, Phalanx::middle),
        fused_scenario("idx2_fused", {Finger::index}, {Phalanx::middle},
                       make_simple_sum_policy(), true),
    };
    run_pipeline(c);
    auto base = tmp.path / "run" / "scenarios";
    CHECK(testutil::read_bytes(base / "idx2_raw" / "roc.csv") ==
          testutil::read_bytes(base / "idx2_fused" / "roc.csv"));
    CHECK(report_eer(base / "idx2_raw" / "report.json") ==
          report_eer(base / "idx2_fused" / "report.json"));
}

TEST_CASE("uniform capture quality collapses quality weighting onto the simple mean") {
    testutil::TempDir tmp;
    RunConfig c = small_run(tmp.path / "run");
    for (auto& [ph, m] : c.synth->phalanx_models) m.nfiq_probs = {0.0, 0.0, 1.0, 0.0, 0.0};
    c.scenarios = {
        fused_scenario("q23", {Finger::index, Finger::middle},
                       {Phalanx::middle, Phalanx::proximal}, make_quality_policy(), false),
        fused_scenario("s23", {Finger::index, Finger::middle},
                       {Phalanx::middle, Phalanx::proximal}, make_simple_sum_policy(), false),
    };
    run_pipeline(c);
    auto base = tmp.path / "run" / "scenarios";
    // The fused CSVs differ only by the self-naming policy column.
    std::string q = testutil::read_text(base / "q23" / "fused.csv");
    std::string s = testutil::read_text(base / "s23" / "fused.csv");
    std::size_t pos = 0;
    while ((pos = q.find(",quality_based,", pos)) != std::string::npos)
        q.replace(pos, 15, ",simple_sum,");
    CHECK(q == s);
    CHECK(testutil::read_bytes(base / "q23" / "roc.csv") ==
          testutil::read_bytes(base / "s23" / "roc.csv"));
}

TEST_CASE("dedup halves the emitted score rows") {
    testutil::TempDir tmp;
    RunConfig c = small_run(tmp.path / "run");
    c.dedup_symmetric = true;
    c.scenarios = {raw_scenario("phalanx2", {Finger::index, Finger::middle}, Phalanx::middle)};
    run_pipeline(c);
    ScoreTable t = read_score_csv(tmp.path / "run" / "scores" / "phalanx2.csv");
    CHECK(t.records.size() == 120);
}

TEST_CASE("strict runs refuse unattainable far targets") {
    // Clone one subject's template files under a second subject id: every
    // impression then has a byte-identical imposter twin scoring a perfect
    // 100, so no threshold reaches FAR 0 and a 1e-6 target cannot be met.
    testutil::TempDir tmp;
    SynthConfig s = default_synth_config();
    s.n_subjects = 1;
    s.fingers_per_hand = 1;
    s.impressions = 2;
    s.seed = 616263;
    GeneratedDataset d = generate_dataset(s);
    write_dataset(d, tmp.path / "data");

    std::vector<ManifestEntry> es = d.manifest.entries();
    for (const ManifestEntry& e : d.manifest.entries()) {
        ManifestEntry twin = e;
        twin.subject_id = "s0001";
        twin.template_id = "s0001" + e.template_id.substr(5);  // keep the same file_path
        es.push_back(std::move(twin));
    }
    save_manifest(DatasetManifest::from_entries(std::move(es)),
                  tmp.path / "data" / "manifest_twins.json");

    RunConfig c;
    c.manifest_path = tmp.path / "data" / "manifest_twins.json";
    c.out_dir = tmp.path / "run";
    c.strict = true;
    c.far_targets = {1e-6};
    c.scenarios = {raw_scenario("phalanx2", {Finger::index}, Phalanx::middle)};
    CHECK_THROWS_AS(run_pipeline(c), UnattainableError);
    // Artifacts for the completed portion still land on disk.
    CHECK(std::filesystem::exists(tmp.path / "run" / "scenarios" / "phalanx2" / "report.json"));
}
