#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phalanx/errors.hpp"

namespace phalanx {

enum class Hand : std::uint8_t { left = 0, right = 1 };
enum class Finger : std::uint8_t { index = 0, middle = 1, ring = 2, little = 3, thumb = 4 };
enum class Phalanx : std::uint8_t { distal = 1, middle = 2, proximal = 3 };

const char* to_string(Hand h);
const char* to_string(Finger f);
Hand hand_from_string(std::string_view s);      // ProtocolError(range) on unknown
Finger finger_from_string(std::string_view s);  // ProtocolError(range) on unknown
Phalanx phalanx_from_number(int n);             // ProtocolError(range) unless 1..3
inline int phalanx_number(Phalanx p) { return static_cast<int>(p); }

struct ManifestEntry {
    std::string template_id;
    std::string subject_id;
    Hand hand = Hand::left;
    Finger finger = Finger::index;
    Phalanx phalanx = Phalanx::distal;
    std::uint8_t impression = 1;  // 1..4
    std::uint8_t session = 1;     // 1..2; impressions 1-2 are session 1, 3-4 session 2
    std::uint8_t nfiq = 3;        // 1..5
    std::string file_path;        // relative to the manifest's directory; may be empty
};

// A unique (subject, hand, finger): the identity unit of the verification
// protocol. Two templates are a genuine pair iff they share one.
struct VirtualSubject {
    std::uint32_t id = 0;
    std::string subject_id;
    Hand hand = Hand::left;
    Finger finger = Finger::index;
};

class DatasetManifest {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    // Validates entries (ranges, session/impression pairing, duplicates) and
    // builds the id and virtual-subject indexes. Throws ProtocolError.
    static DatasetManifest from_entries(std::vector<ManifestEntry> entries);

    const std::vector<ManifestEntry>& entries() const { return entries_; }
    const ManifestEntry& entry(std::size_t i) const { return entries_[i]; }
    std::size_t size() const { return entries_.size(); }

    std::size_t index_of(std::string_view template_id) const;  // npos if unknown

    // Ordinal of the entry's virtual subject; equal ordinals = genuine pair.
    std::uint32_t virtual_subject_of(std::size_t entry_index) const {
        return vs_of_entry_[entry_index];
    }

    // Thumbs are not part of the default protocol and are skipped unless asked for.
    std::vector<VirtualSubject> virtual_subjects(bool include_thumbs = false) const;

    std::uint64_t content_hash() const;

private:
    std::vector<ManifestEntry> entries_;
    std::vector<std::uint32_t> vs_of_entry_;
    std::vector<VirtualSubject> subjects_;  // all, thumbs included
    std::vector<std::uint32_t> id_order_;   // entry indices sorted by template_id
};

// JSON array of entry objects, each with exactly the ManifestEntry fields.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace phalanx
