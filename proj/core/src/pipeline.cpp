#include "phalanx/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "internal_config.hpp"
#include "internal_util.hpp"
#include "phalanx/types.hpp"

namespace phalanx {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<Finger> kAllFingers{Finger::index, Finger::middle, Finger::ring,
                                      Finger::little};

std::string policy_token(const std::optional<WeightPolicy>& p) {
    return p ? to_string(p->kind) : "none";
}

std::string join_fingers(std::span<const Finger> fingers, char sep) {
    std::string out;
    for (Finger f : fingers) {
        if (!out.empty()) out += sep;
        out += to_string(f);
    }
    return out;
}

ScenarioSpec make_scenario(std::string name, std::vector<Finger> fingers,
                           std::vector<Phalanx> phalanges, std::optional<WeightPolicy> policy,
                           bool fuse_fingers) {
    ScenarioSpec s;
    s.name = std::move(name);
    s.fingers = std::move(fingers);
    s.phalanges = std::move(phalanges);
    s.policy = std::move(policy);
    s.fuse_fingers = fuse_fingers;
    return s;
}

}  // namespace

std::vector<ScenarioSpec> expand_preset(const std::string& preset) {
    std::vector<ScenarioSpec> out;
    if (preset == "scenario1_single_phalanx") {
        for (int p = 1; p <= 3; ++p)
            out.push_back(make_scenario("phalanx" + std::to_string(p), kAllFingers,
                                        {phalanx_from_number(p)}, std::nullopt, false));
        return out;
    }
    if (preset == "scenario2_multiphalanx") {
        const std::vector<std::vector<Phalanx>> groups{
            {Phalanx::middle, Phalanx::proximal},
            {Phalanx::distal, Phalanx::middle, Phalanx::proximal}};
        for (const auto& ph : groups) {
            std::string tag = ph.size() == 2 ? "p23" : "p123";
            out.push_back(make_scenario("multiphalanx_" + tag + "_quality", kAllFingers, ph,
                                        make_quality_policy(), false));
            out.push_back(make_scenario("multiphalanx_" + tag + "_simple", kAllFingers, ph,
                                        make_simple_sum_policy(), false));
            out.push_back(make_scenario(
                "multiphalanx_" + tag + "_static", kAllFingers, ph,
                make_static_policy(default_static_weights(ph)), false));
        }
        return out;
    }
    if (preset == "scenario3a_two_finger" || preset == "scenario3b_multi_finger") {
        const std::vector<Phalanx> ph{Phalanx::middle, Phalanx::proximal};
        WeightPolicy policy = make_static_policy(default_static_weights(ph));
        std::vector<std::vector<Finger>> groups;
        std::string stem;
        if (preset == "scenario3a_two_finger") {
            groups = {{Finger::index, Finger::middle},
                      {Finger::middle, Finger::ring},
                      {Finger::ring, Finger::little}};
            stem = "two_finger_";
        } else {
            groups = {{Finger::index, Finger::middle, Finger::ring},
                      {Finger::index, Finger::middle, Finger::ring, Finger::little}};
            stem = "multi_finger_";
        }
        for (const auto& fingers : groups)
            out.push_back(
                make_scenario(stem + join_fingers(fingers, '_'), fingers, ph, policy, true));
        return out;
    }
    throw ConfigError("unknown preset: " + preset);
}

void validate(const RunConfig& config) {
    if (config.synth.has_value() == config.manifest_path.has_value())
        throw ConfigError("exactly one dataset source required (synth or manifest)");
    if (config.synth) validate(*config.synth);
    validate(config.matcher);
    if (config.scenarios.empty()) throw ConfigError("at least one scenario required");
    if (config.jobs < 0) throw ConfigError("jobs must be >= 0");
    if (config.far_targets.empty()) throw ConfigError("at least one FAR target required");
    for (double t : config.far_targets)
        if (!(t > 0.0) || !(t <= 1.0)) throw ConfigError("FAR targets must lie in (0, 1]");

    std::set<std::string> names;
    for (const ScenarioSpec& sc : config.scenarios) {
        if (sc.name.empty()) throw ConfigError("scenario name must not be empty");
        for (char c : sc.name)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
                throw ConfigError("scenario name '" + sc.name +
                                  "' may only use letters, digits, '-' and '_'");
        if (!names.insert(sc.name).second)
            throw ConfigError("duplicate scenario name: " + sc.name);
        const std::string tag = "scenario " + sc.name + ": ";

        if (sc.fingers.empty()) throw ConfigError(tag + "needs at least one finger");
        std::set<Finger> fs(sc.fingers.begin(), sc.fingers.end());
        if (fs.size() != sc.fingers.size()) throw ConfigError(tag + "duplicate finger");
        if (fs.count(Finger::thumb))
            throw ConfigError(tag + "thumbs are outside the matching protocol");

        if (sc.phalanges.empty()) throw ConfigError(tag + "needs at least one phalanx");
        std::set<Phalanx> ps(sc.phalanges.begin(), sc.phalanges.end());
        if (ps.size() != sc.phalanges.size()) throw ConfigError(tag + "duplicate phalanx");

        if (!sc.policy) {
            if (sc.phalanges.size() != 1)
                throw ConfigError(tag + "raw evaluation pools exactly one phalanx");
            continue;
        }
        if (sc.policy->kind == FusionPolicy::static_weight) {
            std::set<Phalanx> ws;
            for (const auto& [p, w] : sc.policy->static_weights) {
                (void)w;
                ws.insert(p);
            }
            if (ws != ps)
                throw ConfigError(tag + "static weights must cover exactly the phalanges");
            try {
                make_static_policy(sc.policy->static_weights);
            } catch (const FusionError& e) {
                throw ConfigError(tag + e.what());
            }
        }
    }
}

namespace {

ScenarioSpec scenario_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("scenario must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        static const char* known[] = {"name",   "fingers",        "phalanges",
                                      "policy", "static_weights", "fuse_fingers"};
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("scenario: unknown key " + key);
    }
    ScenarioSpec sc;
    try {
        sc.name = j.at("name").get<std::string>();
        for (const auto& f : j.at("fingers"))
            sc.fingers.push_back(finger_from_string(f.get<std::string>()));
        for (const auto& p : j.at("phalanges"))
            sc.phalanges.push_back(phalanx_from_number(p.get<int>()));
        std::string policy = j.value("policy", std::string("none"));
        if (policy != "none") {
            FusionPolicy kind = fusion_policy_from_string(policy);
            if (kind == FusionPolicy::static_weight) {
                std::map<Phalanx, double> weights;
                if (j.contains("static_weights")) {
                    for (const auto& [key, value] : j.at("static_weights").items()) {
                        if (key.size() != 1 || key[0] < '1' || key[0] > '3')
                            throw ConfigError(
                                "static_weights keys must be \"1\", \"2\" or \"3\"");
                        weights[phalanx_from_number(key[0] - '0')] = value.get<double>();
                    }
                } else {
                    weights = default_static_weights(sc.phalanges);
                }
                sc.policy = make_static_policy(weights);
            } else if (kind == FusionPolicy::quality_based) {
                sc.policy = make_quality_policy();
            } else {
                sc.policy = make_simple_sum_policy();
            }
        } else if (j.contains("static_weights")) {
            throw ConfigError("static_weights given without the static policy");
        }
        sc.fuse_fingers = j.value("fuse_fingers", true);
    } catch (const ConfigError&) {
        throw;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    } catch (const Error& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    return sc;
}

}  // namespace

RunConfig run_config_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("run config must be an object");
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        static const char* known[] = {"synth",       "manifest", "seed",
                                      "matcher",     "presets",  "scenarios",
                                      "far_targets", "out_dir",  "strict",
                                      "dedup_symmetric", "jobs"};
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("run config: unknown key " + key);
    }

    RunConfig c;
    try {
        if (doc.contains("synth")) c.synth = detail::synth_config_from_json(doc.at("synth"));
        if (doc.contains("manifest"))
            c.manifest_path = std::filesystem::path(doc.at("manifest").get<std::string>());
        if (doc.contains("seed")) {
            if (!c.synth) throw ConfigError("seed is only meaningful with a synth source");
            c.synth->seed = doc.at("seed").get<std::uint64_t>();
        }
        if (doc.contains("matcher")) {
            const json& m = doc.at("matcher");
            for (const auto& [key, value] : m.items()) {
                (void)value;
                static const char* known[] = {"distance_tolerance", "angle_tolerance",
                                              "bin_dx",             "bin_dy",
                                              "bin_dtheta",         "score_scale"};
                bool ok = false;
                for (const char* k : known) ok = ok || key == k;
                if (!ok) throw ConfigError("matcher: unknown key " + key);
            }
            if (m.contains("distance_tolerance"))
                c.matcher.distance_tolerance = m.at("distance_tolerance").get<double>();
            if (m.contains("angle_tolerance"))
                c.matcher.angle_tolerance = m.at("angle_tolerance").get<int>();
            if (m.contains("bin_dx")) c.matcher.bin_dx = m.at("bin_dx").get<int>();
            if (m.contains("bin_dy")) c.matcher.bin_dy = m.at("bin_dy").get<int>();
            if (m.contains("bin_dtheta")) c.matcher.bin_dtheta = m.at("bin_dtheta").get<int>();
            if (m.contains("score_scale"))
                c.matcher.score_scale = m.at("score_scale").get<double>();
        }
        if (doc.contains("presets"))
            for (const auto& p : doc.at("presets"))
                for (ScenarioSpec& sc : expand_preset(p.get<std::string>()))
                    c.scenarios.push_back(std::move(sc));
        if (doc.contains("scenarios"))
            for (const auto& s : doc.at("scenarios")) c.scenarios.push_back(scenario_from_json(s));
        if (doc.contains("far_targets"))
            c.far_targets = doc.at("far_targets").get<std::vector<double>>();
        if (doc.contains("out_dir"))
            c.out_dir = std::filesystem::path(doc.at("out_dir").get<std::string>());
        if (doc.contains("strict")) c.strict = doc.at("strict").get<bool>();
        if (doc.contains("dedup_symmetric"))
            c.dedup_symmetric = doc.at("dedup_symmetric").get<bool>();
        if (doc.contains("jobs")) c.jobs = doc.at("jobs").get<int>();
    } catch (const ConfigError&) {
        throw;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    validate(c);
    return c;
}

ChannelEvaluation evaluate_channel(std::span<const double> genuine,
                                   std::span<const double> imposter,
                                   std::span<const double> far_targets, double confidence) {
    ChannelEvaluation ev;
    ev.roc = roc_curve(genuine, imposter);
    ev.eer = eer(ev.roc);
    ev.operating_points.reserve(far_targets.size());
    for (double t : far_targets) ev.operating_points.push_back(gar_at_far(ev.roc, t, confidence));
    return ev;
}

namespace {

double frac6(double x) { return detail::quantize(x, 6); }
double pct1(double x) { return detail::quantize(x * 100.0, 1); }

ordered_json operating_point_json(const OperatingPoint& op, std::int64_t n_genuine,
                                  std::int64_t n_imposter) {
    ordered_json o;
    o["far_target"] = op.far_target;
    o["attainable"] = op.attainable;
    if (op.attainable) {
        o["threshold"] = detail::quantize(op.threshold, 6);
        o["gar"] = frac6(op.gar);
        o["gar_percent"] = pct1(op.gar);
        o["ci_lower"] = frac6(op.ci_lower);
        o["ci_upper"] = frac6(op.ci_upper);
        o["ci_lower_percent"] = pct1(op.ci_lower);
        o["ci_upper_percent"] = pct1(op.ci_upper);
    } else {
        o["threshold"] = nullptr;
        o["gar"] = nullptr;
        o["gar_percent"] = nullptr;
        o["ci_lower"] = nullptr;
        o["ci_upper"] = nullptr;
        o["ci_lower_percent"] = nullptr;
        o["ci_upper_percent"] = nullptr;
    }
    o["n_genuine"] = n_genuine;
    o["n_imposter"] = n_imposter;
    return o;
}

}  // namespace

std::string evaluation_report_text(const EvaluationMetadata& meta,
                                   const ChannelEvaluation& eval) {
    ordered_json r;
    r["scenario"] = meta.scenario;
    if (!meta.fingers.empty()) {
        ordered_json fs = ordered_json::array();
        for (Finger f : meta.fingers) fs.push_back(to_string(f));
        r["fingers"] = std::move(fs);
    }
    if (!meta.phalanges.empty()) {
        ordered_json ps = ordered_json::array();
        for (Phalanx p : meta.phalanges) ps.push_back(phalanx_number(p));
        r["phalanges"] = std::move(ps);
    }
    r["policy"] = meta.policy;
    if (!meta.static_weights.empty()) {
        ordered_json w = ordered_json::object();
        for (const auto& [p, v] : meta.static_weights)
            w[std::to_string(phalanx_number(p))] = v;
        r["static_weights"] = std::move(w);
    }
    if (meta.fuse_fingers) r["fuse_fingers"] = *meta.fuse_fingers;
    if (meta.dropped_trials) r["dropped_trials"] = *meta.dropped_trials;
    r["n_genuine"] = eval.roc.n_genuine;
    r["n_imposter"] = eval.roc.n_imposter;
    r["eer"] = frac6(eval.eer);
    r["eer_percent"] = pct1(eval.eer);
    ordered_json ops = ordered_json::array();
    for (const OperatingPoint& op : eval.operating_points)
        ops.push_back(operating_point_json(op, eval.roc.n_genuine, eval.roc.n_imposter));
    r["operating_points"] = std::move(ops);
    return r.dump(2) + "\n";
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

void hash_synth(detail::Fnv1a& h, const SynthConfig& s) {
    h.update("synth");
    h.update_u64(static_cast<std::uint64_t>(s.n_subjects));
    h.update_u64(static_cast<std::uint64_t>(s.fingers_per_hand));
    h.update_u64(static_cast<std::uint64_t>(s.impressions));
    h.update_u64(static_cast<std::uint64_t>(s.image_width));
    h.update_u64(static_cast<std::uint64_t>(s.image_height));
    h.update_u64(static_cast<std::uint64_t>(s.resolution));
    h.update_u64(s.seed);
    for (const auto& [p, m] : s.phalanx_models) {
        h.update_u64(static_cast<std::uint64_t>(phalanx_number(p)));
        h.update_double(m.count_mean);
        h.update_double(m.count_std);
        h.update_double(m.jitter_sigma);
        h.update_double(m.deletion_rate);
        h.update_double(m.spurious_rate);
        for (double q : m.nfiq_probs) h.update_double(q);
    }
    for (double q : s.quality.jitter_mult) h.update_double(q);
    for (double q : s.quality.spurious_mult) h.update_double(q);
    h.update_u64(static_cast<std::uint64_t>(s.transform.max_dx));
    h.update_u64(static_cast<std::uint64_t>(s.transform.max_dy));
    h.update_u64(static_cast<std::uint64_t>(s.transform.max_dtheta));
}

// Semantic configuration only: execution-width and output-location knobs
// (jobs, strict, out_dir) never reach the hash, so a parallel rerun locks
// identically to a sequential one.
std::uint64_t semantic_config_hash(const RunConfig& c, const DatasetManifest& manifest) {
    detail::Fnv1a h;
    if (c.synth) {
        hash_synth(h, *c.synth);
    } else {
        h.update("manifest");
        h.update_u64(manifest.content_hash());
    }
    h.update("matcher");
    h.update_double(c.matcher.distance_tolerance);
    h.update_u64(static_cast<std::uint64_t>(c.matcher.angle_tolerance));
    h.update_u64(static_cast<std::uint64_t>(c.matcher.bin_dx));
    h.update_u64(static_cast<std::uint64_t>(c.matcher.bin_dy));
    h.update_u64(static_cast<std::uint64_t>(c.matcher.bin_dtheta));
    h.update_double(c.matcher.score_scale);
    h.update("scenarios");
    for (const ScenarioSpec& sc : c.scenarios) {
        h.update(sc.name);
        for (Finger f : sc.fingers) h.update_u64(static_cast<std::uint64_t>(f));
        for (Phalanx p : sc.phalanges) h.update_u64(static_cast<std::uint64_t>(phalanx_number(p)));
        h.update(policy_token(sc.policy));
        if (sc.policy)
            for (const auto& [p, w] : sc.policy->static_weights) {
                h.update_u64(static_cast<std::uint64_t>(phalanx_number(p)));
                h.update_double(w);
            }
        h.update_u64(sc.policy && sc.fuse_fingers ? 1 : 0);
    }
    h.update("far_targets");
    for (double t : c.far_targets) h.update_double(t);
    h.update_u64(c.dedup_symmetric ? 1 : 0);
    return h.h;
}

// Genuine scores keyed by (virtual subject, probe impression, gallery
// impression) so the same comparison aligns across phalanx channels.
using GenuineKey = std::tuple<std::uint32_t, int, int>;

std::map<GenuineKey, double> genuine_by_trial(const ScoreTable& table,
                                              const DatasetManifest& manifest) {
    std::map<GenuineKey, double> out;
    for (const ScoreRecord& r : table.records) {
        if (!r.genuine) continue;
        std::size_t pi = manifest.index_of(table.ids[r.probe_ref]);
        std::size_t gi = manifest.index_of(table.ids[r.gallery_ref]);
        const ManifestEntry& pe = manifest.entry(pi);
        const ManifestEntry& ge = manifest.entry(gi);
        out[{manifest.virtual_subject_of(pi), pe.impression, ge.impression}] = r.score;
    }
    return out;
}

std::string correlations_text(const std::map<Phalanx, ScoreTable>& tables,
                              const DatasetManifest& manifest) {
    ordered_json arr = ordered_json::array();
    std::vector<Phalanx> phs;
    for (const auto& [p, t] : tables) {
        (void)t;
        phs.push_back(p);
    }
    std::map<Phalanx, std::map<GenuineKey, double>> keyed;
    if (phs.size() >= 2)
        for (Phalanx p : phs) keyed[p] = genuine_by_trial(tables.at(p), manifest);
    for (std::size_t a = 0; a < phs.size(); ++a) {
        for (std::size_t b = a + 1; b < phs.size(); ++b) {
            const auto& ma = keyed[phs[a]];
            const auto& mb = keyed[phs[b]];
            std::vector<double> x, y;
            for (const auto& [key, sa] : ma) {
                auto it = mb.find(key);
                if (it == mb.end()) continue;
                x.push_back(sa);
                y.push_back(it->second);
            }
            ordered_json e;
            e["phalanx_a"] = phalanx_number(phs[a]);
            e["phalanx_b"] = phalanx_number(phs[b]);
            e["n_pairs"] = x.size();
            try {
                e["pearson"] = frac6(pearson_correlation(x, y));
            } catch (const EvalError&) {
                e["pearson"] = nullptr;
            }
            arr.push_back(std::move(e));
        }
    }
    ordered_json doc;
    doc["genuine_score_correlations"] = std::move(arr);
    return doc.dump(2) + "\n";
}

}  // namespace

ScoreTable import_scores(const std::filesystem::path& path, double max_score) {
    ScoreTable t = read_score_csv(path);
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        const ScoreRecord& r = t.records[i];
        const std::string where = path.string() + ": record " + std::to_string(i + 1) + ": ";
        if (r.nfiq_probe < 1 || r.nfiq_probe > 5 || r.nfiq_gallery < 1 || r.nfiq_gallery > 5)
            throw ProtocolError(ProtocolFault::range, where + "nfiq outside 1..5");
        if (!(r.score >= 0.0) || !(r.score <= max_score))
            throw ProtocolError(ProtocolFault::range, where + "score outside [0, " +
                                                          std::to_string(max_score) + "]");
    }
    return t;
}

void run_pipeline(const RunConfig& config) {
    validate(config);
    const std::filesystem::path& out = config.out_dir;
    std::filesystem::create_directories(out);

    // Dataset: synthesized sets are written to disk and read back through the
    // codec, so every downstream score passed through the file format.
    DatasetManifest manifest;
    std::vector<MinutiaTemplate> templates;
    if (config.synth) {
        GeneratedDataset ds = generate_dataset(*config.synth);
        write_dataset(ds, out / "dataset");
        manifest = load_manifest(out / "dataset" / "manifest.json");
        templates = load_templates(manifest, out / "dataset");
    } else {
        manifest = load_manifest(*config.manifest_path);
        templates = load_templates(manifest, config.manifest_path->parent_path());
    }

    std::set<Phalanx> needed;
    for (const ScenarioSpec& sc : config.scenarios)
        needed.insert(sc.phalanges.begin(), sc.phalanges.end());

    std::filesystem::create_directories(out / "scores");
    PairOptions pair_options;
    pair_options.dedup_symmetric = config.dedup_symmetric;
    std::map<Phalanx, ScoreTable> tables;
    for (Phalanx p : needed) {
        std::array<Phalanx, 1> ps{p};
        std::vector<MatchPair> pairs = generate_pairs(manifest, default_channels(ps), pair_options);
        ScoreTable table =
            execute_matching(manifest, pairs, templates, config.matcher, config.jobs);
        write_score_csv(table,
                        out / "scores" / ("phalanx" + std::to_string(phalanx_number(p)) + ".csv"));
        tables.emplace(p, std::move(table));
    }

    std::string unattainable;
    for (const ScenarioSpec& sc : config.scenarios) {
        std::filesystem::path dir = out / "scenarios" / sc.name;
        std::filesystem::create_directories(dir);

        EvaluationMetadata meta;
        meta.scenario = sc.name;
        meta.fingers = sc.fingers;
        meta.phalanges = sc.phalanges;
        meta.policy = policy_token(sc.policy);
        if (sc.policy) meta.fuse_fingers = sc.fuse_fingers;

        std::vector<double> genuine, imposter;
        if (!sc.policy) {
            // Pooled single-phalanx channel: both sides of every retained pair
            // must sit in the scenario's finger set.
            std::set<Finger> fs(sc.fingers.begin(), sc.fingers.end());
            const ScoreTable& table = tables.at(sc.phalanges.front());
            for (const ScoreRecord& r : table.records) {
                if (!fs.count(r.probe_finger) || !fs.count(r.gallery_finger)) continue;
                (r.genuine ? genuine : imposter).push_back(r.score);
            }
        } else {
            meta.static_weights = sc.policy->static_weights;
            // Per-phalanx tables share one id list (the manifest's), so a
            // multi-phalanx table is plain record concatenation.
            std::vector<Phalanx> order(sc.phalanges);
            std::sort(order.begin(), order.end());
            ScoreTable merged;
            const ScoreTable& first = tables.at(order.front());
            merged.ids = first.ids;
            merged.params_hash = first.params_hash;
            merged.manifest_hash = first.manifest_hash;
            for (Phalanx p : order) {
                const ScoreTable& t = tables.at(p);
                merged.records.insert(merged.records.end(), t.records.begin(), t.records.end());
            }

            FusionScenario fusion_scenario;
            fusion_scenario.fingers = sc.fingers;
            fusion_scenario.phalanges = sc.phalanges;
            fusion_scenario.fuse_fingers = sc.fuse_fingers;
            FusionSetResult sets = build_fusion_sets(merged, manifest, fusion_scenario,
                                                     PairingRule::matched_impressions,
                                                     config.strict);
            meta.dropped_trials = sets.dropped_trials;
            std::vector<FusedScore> fused = fuse_all(sets.sets, *sc.policy, merged);
            for (FusedScore& f : fused) f.value = detail::quantize(f.value, 6);
            write_fused_csv(fused, sc.policy->kind, dir / "fused.csv");
            for (const FusedScore& f : fused) (f.genuine ? genuine : imposter).push_back(f.value);
        }

        ChannelEvaluation eval;
        try {
            eval = evaluate_channel(genuine, imposter, config.far_targets);
        } catch (const EvalError& e) {
            throw EvalError(e.fault(), "scenario " + sc.name + ": " + e.what());
        }
        write_roc_csv(eval.roc, dir / "roc.csv");
        write_text(dir / "report.json", evaluation_report_text(meta, eval));
        if (unattainable.empty())
            for (const OperatingPoint& op : eval.operating_points)
                if (!op.attainable) {
                    std::ostringstream os;
                    os << "scenario " << sc.name << ": FAR target " << op.far_target
                       << " is below 1/" << eval.roc.n_imposter << " and has no threshold";
                    unattainable = os.str();
                    break;
                }
    }

    write_text(out / "correlations.json", correlations_text(tables, manifest));

    ordered_json lock;
    lock["version"] = kVersionString;
    if (config.synth)
        lock["seed"] = config.synth->seed;
    else
        lock["seed"] = nullptr;
    lock["config_hash"] = detail::hex_u64(semantic_config_hash(config, manifest));
    lock["manifest_hash"] = detail::hex_u64(manifest.content_hash());
    lock["matcher_params_hash"] = detail::hex_u64(params_hash(config.matcher));
    write_text(out / "run.lock.json", lock.dump(2) + "\n");

    if (config.strict && !unattainable.empty()) throw UnattainableError(unattainable);
}

}  // namespace phalanx
