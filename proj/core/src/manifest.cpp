#include "phalanx/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "json.hpp"

#include "internal_util.hpp"

namespace phalanx {

const char* to_string(Hand h) { return h == Hand::left ? "left" : "right"; }

const char* to_string(Finger f) {
    switch (f) {
        case Finger::index: return "index";
        case Finger::middle: return "middle";
        case Finger::ring: return "ring";
        case Finger::little: return "little";
        case Finger::thumb: return "thumb";
    }
    return "?";
}

Hand hand_from_string(std::string_view s) {
    if (s == "left") return Hand::left;
    if (s == "right") return Hand::right;
    throw ProtocolError(ProtocolFault::range, "unknown hand: " + std::string(s));
}

Finger finger_from_string(std::string_view s) {
    if (s == "index") return Finger::index;
    if (s == "middle") return Finger::middle;
    if (s == "ring") return Finger::ring;
    if (s == "little") return Finger::little;
    if (s == "thumb") return Finger::thumb;
    throw ProtocolError(ProtocolFault::range, "unknown finger: " + std::string(s));
}

Phalanx phalanx_from_number(int n) {
    if (n < 1 || n > 3) throw ProtocolError(ProtocolFault::range, "phalanx outside 1..3");
    return static_cast<Phalanx>(n);
}

namespace {

void check_id_text(const std::string& s, const char* field) {
    if (s.empty()) throw ProtocolError(ProtocolFault::range, std::string(field) + " is empty");
    for (char c : s)
        if (c == ',' || c == '\n' || c == '\r')
            throw ProtocolError(ProtocolFault::range,
                                std::string(field) + " contains a separator character: " + s);
}

}  // namespace

DatasetManifest DatasetManifest::from_entries(std::vector<ManifestEntry> entries) {
    DatasetManifest m;
    m.entries_ = std::move(entries);

    std::set<std::string_view> seen_ids;
    std::set<std::tuple<std::string_view, Hand, Finger, Phalanx, int>> seen_slots;
    for (const ManifestEntry& e : m.entries_) {
        check_id_text(e.template_id, "template_id");
        check_id_text(e.subject_id, "subject_id");
        if (e.impression < 1 || e.impression > 4)
            throw ProtocolError(ProtocolFault::range, e.template_id + ": impression outside 1..4");
        int expected_session = e.impression <= 2 ? 1 : 2;
        if (e.session != expected_session)
            throw ProtocolError(ProtocolFault::range,
                                e.template_id + ": impression " + std::to_string(e.impression) +
                                    " must have session " + std::to_string(expected_session));
        if (e.nfiq < 1 || e.nfiq > 5)
            throw ProtocolError(ProtocolFault::range, e.template_id + ": nfiq outside 1..5");
        if (!seen_ids.insert(e.template_id).second)
            throw ProtocolError(ProtocolFault::duplicate_entry,
                                "duplicate template_id: " + e.template_id);
        if (!seen_slots.insert({e.subject_id, e.hand, e.finger, e.phalanx, e.impression}).second)
            throw ProtocolError(ProtocolFault::duplicate_entry,
                                e.template_id + ": duplicate (subject, hand, finger, phalanx, "
                                                "impression) slot");
    }

    // Virtual subject ordinals in sorted (subject, hand, finger) order, so
    // ids do not depend on entry order.
    std::map<std::tuple<std::string_view, Hand, Finger>, std::uint32_t> vs_ids;
    for (const ManifestEntry& e : m.entries_)
        vs_ids.emplace(std::make_tuple(std::string_view(e.subject_id), e.hand, e.finger), 0);
    std::uint32_t next = 0;
    for (auto& [key, id] : vs_ids) id = next++;
    m.subjects_.resize(vs_ids.size());
    for (const auto& [key, id] : vs_ids) {
        m.subjects_[id] =
            VirtualSubject{id, std::string(std::get<0>(key)), std::get<1>(key), std::get<2>(key)};
    }
    m.vs_of_entry_.reserve(m.entries_.size());
    for (const ManifestEntry& e : m.entries_)
        m.vs_of_entry_.push_back(
            vs_ids.at(std::make_tuple(std::string_view(e.subject_id), e.hand, e.finger)));

    m.id_order_.resize(m.entries_.size());
    for (std::uint32_t i = 0; i < m.id_order_.size(); ++i) m.id_order_[i] = i;
    std::sort(m.id_order_.begin(), m.id_order_.end(), [&](std::uint32_t a, std::uint32_t b) {
        return m.entries_[a].template_id < m.entries_[b].template_id;
    });
    return m;
}

std::size_t DatasetManifest::index_of(std::string_view template_id) const {
    auto it = std::lower_bound(id_order_.begin(), id_order_.end(), template_id,
                               [&](std::uint32_t i, std::string_view id) {
                                   return std::string_view(entries_[i].template_id) < id;
                               });
    if (it == id_order_.end() || entries_[*it].template_id != template_id) return npos;
    return *it;
}

std::vector<VirtualSubject> DatasetManifest::virtual_subjects(bool include_thumbs) const {
    std::vector<VirtualSubject> out;
    out.reserve(subjects_.size());
    for (const VirtualSubject& v : subjects_)
        if (include_thumbs || v.finger != Finger::thumb) out.push_back(v);
    return out;
}

std::uint64_t DatasetManifest::content_hash() const {
    detail::Fnv1a h;
    for (const ManifestEntry& e : entries_) {
        h.update(e.template_id);
        h.update(e.subject_id);
        h.update(to_string(e.hand));
        h.update(to_string(e.finger));
        h.update_u64(static_cast<std::uint64_t>(e.phalanx));
        h.update_u64(e.impression);
        h.update_u64(e.session);
        h.update_u64(e.nfiq);
        h.update(e.file_path);
    }
    return h.h;
}

namespace {

using nlohmann::json;

const char* kEntryKeys[] = {"template_id", "subject_id", "hand",    "finger",   "phalanx",
                            "impression",  "session",    "nfiq",    "file_path"};

int require_int(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_number_integer())
        throw ProtocolError(ProtocolFault::schema, where + ": " + key + " must be an integer");
    return v.get<int>();
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_string())
        throw ProtocolError(ProtocolFault::schema, where + ": " + key + " must be a string");
    return v.get<std::string>();
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ProtocolError(ProtocolFault::schema, "cannot open manifest " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ProtocolError(ProtocolFault::schema, path.string() + ": " + e.what());
    }
    if (!doc.is_array())
        throw ProtocolError(ProtocolFault::schema, path.string() + ": top level must be an array");

    std::vector<ManifestEntry> entries;
    entries.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& obj = doc[i];
        std::string where = path.filename().string() + "[" + std::to_string(i) + "]";
        if (!obj.is_object())
            throw ProtocolError(ProtocolFault::schema, where + ": entry must be an object");
        for (const auto& [key, value] : obj.items()) {
            (void)value;
            bool known = false;
            for (const char* k : kEntryKeys) known = known || key == k;
            if (!known)
                throw ProtocolError(ProtocolFault::schema, where + ": unknown key " + key);
        }
        for (const char* k : kEntryKeys)
            if (!obj.contains(k))
                throw ProtocolError(ProtocolFault::schema, where + ": missing key " + std::string(k));

        ManifestEntry e;
        e.template_id = require_string(obj, "template_id", where);
        e.subject_id = require_string(obj, "subject_id", where);
        e.hand = hand_from_string(require_string(obj, "hand", where));
        e.finger = finger_from_string(require_string(obj, "finger", where));
        e.phalanx = phalanx_from_number(require_int(obj, "phalanx", where));
        int impression = require_int(obj, "impression", where);
        int session = require_int(obj, "session", where);
        int nfiq = require_int(obj, "nfiq", where);
        if (impression < 0 || impression > 255 || session < 0 || session > 255 || nfiq < 0 ||
            nfiq > 255)
            throw ProtocolError(ProtocolFault::range, where + ": field out of byte range");
        e.impression = static_cast<std::uint8_t>(impression);
        e.session = static_cast<std::uint8_t>(session);
        e.nfiq = static_cast<std::uint8_t>(nfiq);
        e.file_path = require_string(obj, "file_path", where);
        entries.push_back(std::move(e));
    }
    return DatasetManifest::from_entries(std::move(entries));
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const ManifestEntry& e : manifest.entries()) {
        nlohmann::ordered_json obj;
        obj["template_id"] = e.template_id;
        obj["subject_id"] = e.subject_id;
        obj["hand"] = to_string(e.hand);
        obj["finger"] = to_string(e.finger);
        obj["phalanx"] = phalanx_number(e.phalanx);
        obj["impression"] = e.impression;
        obj["session"] = e.session;
        obj["nfiq"] = e.nfiq;
        obj["file_path"] = e.file_path;
        doc.push_back(std::move(obj));
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

}  // namespace phalanx
