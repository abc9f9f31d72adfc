#include "phalanx/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "internal_config.hpp"
#include "phalanx/codec.hpp"
#include "phalanx/rng.hpp"

namespace phalanx {

SynthConfig default_synth_config() {
    SynthConfig c;
    // Counts follow the observed per-phalanx means; degradation grows toward
    // the proximal phalanx (more jitter, more drop-outs, many more spurious
    // minutiae, worse capture grades).
    c.phalanx_models[Phalanx::distal] =
        PhalanxModel{62.0, 16.0, 4.5, 0.15, 0.12, {0.30, 0.30, 0.20, 0.13, 0.07}};
    c.phalanx_models[Phalanx::middle] =
        PhalanxModel{83.0, 23.0, 6.5, 0.25, 0.20, {0.08, 0.22, 0.30, 0.25, 0.15}};
    c.phalanx_models[Phalanx::proximal] =
        PhalanxModel{94.0, 30.0, 8.5, 0.35, 0.28, {0.03, 0.10, 0.25, 0.34, 0.28}};
    return c;
}

void validate(const SynthConfig& c) {
    if (c.n_subjects < 1) throw ConfigError("n_subjects must be >= 1");
    if (c.fingers_per_hand < 1 || c.fingers_per_hand > 4)
        throw ConfigError("fingers_per_hand must be 1..4");
    if (c.impressions < 1 || c.impressions > 4) throw ConfigError("impressions must be 1..4");
    if (c.image_width < 2 || c.image_width > 0x3FFF || c.image_height < 2 ||
        c.image_height > 0x3FFF)
        throw ConfigError("image dimensions must fit 2..16383");
    if (c.resolution < 1 || c.resolution > 0xFFFF) throw ConfigError("resolution out of range");
    if (c.phalanx_models.empty()) throw ConfigError("no phalanx models");
    for (const auto& [ph, m] : c.phalanx_models) {
        std::string tag = "phalanx " + std::to_string(phalanx_number(ph)) + ": ";
        if (!(m.count_mean > 0.0)) throw ConfigError(tag + "count_mean must be positive");
        if (!(m.count_std >= 0.0)) throw ConfigError(tag + "count_std must be >= 0");
        if (!(m.jitter_sigma >= 0.0)) throw ConfigError(tag + "jitter_sigma must be >= 0");
        if (!(m.deletion_rate >= 0.0) || !(m.deletion_rate <= 1.0))
            throw ConfigError(tag + "deletion_rate outside [0,1]");
        if (!(m.spurious_rate >= 0.0)) throw ConfigError(tag + "spurious_rate must be >= 0");
        double prob_sum = 0.0;
        for (double p : m.nfiq_probs) {
            if (!(p >= 0.0)) throw ConfigError(tag + "nfiq probabilities must be >= 0");
            prob_sum += p;
        }
        if (std::abs(prob_sum - 1.0) > 1e-9)
            throw ConfigError(tag + "nfiq probabilities must sum to 1");
    }
    for (int i = 1; i < 5; ++i) {
        if (c.quality.jitter_mult[i] < c.quality.jitter_mult[i - 1] ||
            c.quality.spurious_mult[i] < c.quality.spurious_mult[i - 1])
            throw ConfigError("quality multipliers must be non-decreasing in nfiq");
    }
    if (c.transform.max_dx < 0 || c.transform.max_dy < 0 || c.transform.max_dtheta < 0 ||
        c.transform.max_dtheta > 127)
        throw ConfigError("transform range invalid");
}

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

constexpr Finger kFingers[] = {Finger::index, Finger::middle, Finger::ring, Finger::little};

// ISO-style finger position codes: right thumb..little = 1..5, left = 6..10.
std::uint8_t finger_position_code(Hand h, Finger f) {
    int base = h == Hand::right ? 1 : 6;
    switch (f) {
        case Finger::thumb: return static_cast<std::uint8_t>(base);
        case Finger::index: return static_cast<std::uint8_t>(base + 1);
        case Finger::middle: return static_cast<std::uint8_t>(base + 2);
        case Finger::ring: return static_cast<std::uint8_t>(base + 3);
        case Finger::little: return static_cast<std::uint8_t>(base + 4);
    }
    return 0;
}

std::string make_subject_id(int s) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%04d", s);
    return buf;
}

std::uint16_t clamp_coord(long long v, int limit) {
    return static_cast<std::uint16_t>(std::clamp<long long>(v, 0, limit - 1));
}

}  // namespace

GeneratedDataset generate_dataset(const SynthConfig& config) {
    validate(config);

    GeneratedDataset out;
    std::vector<ManifestEntry> entries;

    const double cx = (config.image_width - 1) / 2.0;
    const double cy = (config.image_height - 1) / 2.0;

    std::uint64_t finger_stream = 0;
    for (int s = 0; s < config.n_subjects; ++s) {
        std::string subject = make_subject_id(s);
        for (Hand hand : {Hand::left, Hand::right}) {
            for (int fi = 0; fi < config.fingers_per_hand; ++fi, ++finger_stream) {
                Finger finger = kFingers[fi];
                Rng rng(Rng::stream_seed(config.seed, finger_stream));

                for (const auto& [phalanx, model] : config.phalanx_models) {
                    // Master set for this (finger, phalanx).
                    int master_n = static_cast<int>(std::clamp(
                        std::llround(rng.gaussian(model.count_mean, model.count_std)), 4LL,
                        255LL));
                    struct MasterMinutia {
                        double x, y;
                        std::uint8_t angle;
                        MinutiaType type;
                        std::uint8_t quality;
                    };
                    std::vector<MasterMinutia> master(master_n);
                    for (MasterMinutia& m : master) {
                        m.x = static_cast<double>(rng.uniform_int(0, config.image_width - 1));
                        m.y = static_cast<double>(rng.uniform_int(0, config.image_height - 1));
                        m.angle = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
                        m.type = rng.bernoulli(0.5) ? MinutiaType::ridge_ending
                                                    : MinutiaType::bifurcation;
                        m.quality = static_cast<std::uint8_t>(rng.uniform_int(40, 95));
                    }

                    for (int imp = 1; imp <= config.impressions; ++imp) {
                        int nfiq = 1 + static_cast<int>(rng.categorical(model.nfiq_probs));
                        double jitter = model.jitter_sigma * config.quality.jitter_mult[nfiq - 1];
                        double spurious_mean = model.spurious_rate *
                                               config.quality.spurious_mult[nfiq - 1] * master_n;

                        int tdx = static_cast<int>(
                            rng.uniform_int(-config.transform.max_dx, config.transform.max_dx));
                        int tdy = static_cast<int>(
                            rng.uniform_int(-config.transform.max_dy, config.transform.max_dy));
                        int tdt = static_cast<int>(rng.uniform_int(-config.transform.max_dtheta,
                                                                   config.transform.max_dtheta));
                        double rad = kTwoPi * tdt / 256.0;
                        double ct = std::cos(rad), st = std::sin(rad);

                        MinutiaTemplate tpl;
                        tpl.header.capture_equipment_id = 1;
                        tpl.header.image_width = static_cast<std::uint16_t>(config.image_width);
                        tpl.header.image_height = static_cast<std::uint16_t>(config.image_height);
                        tpl.header.resolution_x = static_cast<std::uint16_t>(config.resolution);
                        tpl.header.resolution_y = static_cast<std::uint16_t>(config.resolution);
                        tpl.header.finger_position = finger_position_code(hand, finger);
                        tpl.header.impression_number = static_cast<std::uint8_t>(imp);
                        tpl.nfiq = nfiq;

                        for (const MasterMinutia& m : master) {
                            if (rng.bernoulli(model.deletion_rate)) continue;
                            double rx = ct * (m.x - cx) - st * (m.y - cy) + cx + tdx;
                            double ry = st * (m.x - cx) + ct * (m.y - cy) + cy + tdy;
                            rx += rng.gaussian(0.0, jitter);
                            ry += rng.gaussian(0.0, jitter);
                            Minutia mm;
                            mm.x = clamp_coord(std::llround(rx), config.image_width);
                            mm.y = clamp_coord(std::llround(ry), config.image_height);
                            mm.angle = static_cast<std::uint8_t>((m.angle + tdt) & 255);
                            mm.type = m.type;
                            mm.quality = m.quality;
                            tpl.minutiae.push_back(mm);
                        }
                        std::int64_t spurious_n = rng.poisson(spurious_mean);
                        for (std::int64_t sp = 0; sp < spurious_n; ++sp) {
                            Minutia mm;
                            mm.x = static_cast<std::uint16_t>(
                                rng.uniform_int(0, config.image_width - 1));
                            mm.y = static_cast<std::uint16_t>(
                                rng.uniform_int(0, config.image_height - 1));
                            mm.angle = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
                            mm.type = rng.bernoulli(0.5) ? MinutiaType::ridge_ending
                                                         : MinutiaType::bifurcation;
                            mm.quality = static_cast<std::uint8_t>(rng.uniform_int(20, 80));
                            tpl.minutiae.push_back(mm);
                        }
                        if (tpl.minutiae.size() > 255) tpl.minutiae.resize(255);

                        ManifestEntry e;
                        char idbuf[64];
                        std::snprintf(idbuf, sizeof idbuf, "%s-%c-%s-p%d-i%d", subject.c_str(),
                                      hand == Hand::left ? 'L' : 'R', to_string(finger),
                                      phalanx_number(phalanx), imp);
                        e.template_id = idbuf;
                        e.subject_id = subject;
                        e.hand = hand;
                        e.finger = finger;
                        e.phalanx = phalanx;
                        e.impression = static_cast<std::uint8_t>(imp);
                        e.session = static_cast<std::uint8_t>(imp <= 2 ? 1 : 2);
                        e.nfiq = static_cast<std::uint8_t>(nfiq);
                        e.file_path = std::string("templates/") + idbuf + ".fmr";
                        entries.push_back(std::move(e));
                        out.templates.push_back(std::move(tpl));
                    }
                }
            }
        }
    }

    out.manifest = DatasetManifest::from_entries(std::move(entries));
    return out;
}

void write_dataset(const GeneratedDataset& dataset, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir / "templates");
    for (std::size_t i = 0; i < dataset.manifest.size(); ++i) {
        const ManifestEntry& e = dataset.manifest.entry(i);
        write_template_file(out_dir / e.file_path, dataset.templates[i]);
    }
    save_manifest(dataset.manifest, out_dir / "manifest.json");
}

namespace {

using nlohmann::json;

void read_phalanx_model(const json& j, PhalanxModel& m, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        static const char* known[] = {"count_mean",    "count_std",     "jitter_sigma",
                                      "deletion_rate", "spurious_rate", "nfiq_probs"};
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError(where + ": unknown key " + key);
    }
    if (j.contains("count_mean")) m.count_mean = j.at("count_mean").get<double>();
    if (j.contains("count_std")) m.count_std = j.at("count_std").get<double>();
    if (j.contains("jitter_sigma")) m.jitter_sigma = j.at("jitter_sigma").get<double>();
    if (j.contains("deletion_rate")) m.deletion_rate = j.at("deletion_rate").get<double>();
    if (j.contains("spurious_rate")) m.spurious_rate = j.at("spurious_rate").get<double>();
    if (j.contains("nfiq_probs")) {
        auto v = j.at("nfiq_probs").get<std::vector<double>>();
        if (v.size() != 5) throw ConfigError(where + ": nfiq_probs needs 5 entries");
        std::copy(v.begin(), v.end(), m.nfiq_probs.begin());
    }
}

}  // namespace

SynthConfig detail::synth_config_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("synthetic config must be an object");
    SynthConfig c = default_synth_config();
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        static const char* known[] = {"n_subjects", "fingers_per_hand", "impressions",
                                      "phalanx_models", "quality", "transform",
                                      "image_width", "image_height", "resolution", "seed"};
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("synthetic config: unknown key " + key);
    }
    try {
        if (doc.contains("n_subjects")) c.n_subjects = doc.at("n_subjects").get<int>();
        if (doc.contains("fingers_per_hand"))
            c.fingers_per_hand = doc.at("fingers_per_hand").get<int>();
        if (doc.contains("impressions")) c.impressions = doc.at("impressions").get<int>();
        if (doc.contains("image_width")) c.image_width = doc.at("image_width").get<int>();
        if (doc.contains("image_height")) c.image_height = doc.at("image_height").get<int>();
        if (doc.contains("resolution")) c.resolution = doc.at("resolution").get<int>();
        if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("phalanx_models")) {
            const json& pm = doc.at("phalanx_models");
            if (!pm.is_object()) throw ConfigError("phalanx_models must be an object");
            for (const auto& [key, value] : pm.items()) {
                if (key != "1" && key != "2" && key != "3")
                    throw ConfigError("phalanx_models keys must be \"1\", \"2\" or \"3\"");
                Phalanx ph = phalanx_from_number(key[0] - '0');
                read_phalanx_model(value, c.phalanx_models[ph], "phalanx_models." + key);
            }
        }
        if (doc.contains("quality")) {
            const json& q = doc.at("quality");
            if (q.contains("jitter_mult")) {
                auto v = q.at("jitter_mult").get<std::vector<double>>();
                if (v.size() != 5) throw ConfigError("quality.jitter_mult needs 5 entries");
                std::copy(v.begin(), v.end(), c.quality.jitter_mult.begin());
            }
            if (q.contains("spurious_mult")) {
                auto v = q.at("spurious_mult").get<std::vector<double>>();
                if (v.size() != 5) throw ConfigError("quality.spurious_mult needs 5 entries");
                std::copy(v.begin(), v.end(), c.quality.spurious_mult.begin());
            }
        }
        if (doc.contains("transform")) {
            const json& t = doc.at("transform");
            if (t.contains("max_dx")) c.transform.max_dx = t.at("max_dx").get<int>();
            if (t.contains("max_dy")) c.transform.max_dy = t.at("max_dy").get<int>();
            if (t.contains("max_dtheta")) c.transform.max_dtheta = t.at("max_dtheta").get<int>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synthetic config: ") + e.what());
    }
    validate(c);
    return c;
}

SynthConfig synth_config_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return detail::synth_config_from_json(doc);
}

}  // namespace phalanx
