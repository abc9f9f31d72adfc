#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "phalanx/manifest.hpp"

#include "test_util.hpp"

using namespace phalanx;

namespace {

ManifestEntry entry(const std::string& id, const std::string& subject, Hand hand, Finger finger,
                    Phalanx phalanx, int impression) {
    ManifestEntry e;
    e.template_id = id;
    e.subject_id = subject;
    e.hand = hand;
    e.finger = finger;
    e.phalanx = phalanx;
    e.impression = static_cast<std::uint8_t>(impression);
    e.session = static_cast<std::uint8_t>(impression <= 2 ? 1 : 2);
    e.nfiq = 3;
    e.file_path = "templates/" + id + ".fmr";
    return e;
}

std::vector<ManifestEntry> small_set() {
    return {
        entry("a-1", "s1", Hand::left, Finger::index, Phalanx::distal, 1),
        entry("a-2", "s1", Hand::left, Finger::index, Phalanx::distal, 2),
        entry("b-1", "s1", Hand::right, Finger::index, Phalanx::distal, 1),
        entry("c-1", "s2", Hand::left, Finger::middle, Phalanx::middle, 3),
    };
}

ProtocolFault fault_of(std::vector<ManifestEntry> entries) {
    try {
        DatasetManifest::from_entries(std::move(entries));
    } catch (const ProtocolError& e) {
        return e.fault();
    }
    FAIL("expected ProtocolError");
    return ProtocolFault::schema;
}

}  // namespace

TEST_CASE("an empty entry list is a valid empty manifest") {
    DatasetManifest m = DatasetManifest::from_entries({});
    CHECK(m.size() == 0);
    CHECK(m.virtual_subjects().empty());
    CHECK(m.index_of("anything") == DatasetManifest::npos);

    testutil::TempDir tmp;
    save_manifest(m, tmp.path / "empty.json");
    DatasetManifest back = load_manifest(tmp.path / "empty.json");
    CHECK(back.size() == 0);
}

TEST_CASE("virtual subjects key on (subject, hand, finger) only") {
    DatasetManifest m = DatasetManifest::from_entries(small_set());
    REQUIRE(m.size() == 4);
    // a-1 and a-2: same virtual subject; b-1 differs by hand; c-1 by all.
    CHECK(m.virtual_subject_of(0) == m.virtual_subject_of(1));
    CHECK(m.virtual_subject_of(0) != m.virtual_subject_of(2));
    CHECK(m.virtual_subject_of(0) != m.virtual_subject_of(3));
    CHECK(m.virtual_subjects().size() == 3);

    // Ordinals follow sorted (subject, hand, finger), not entry order.
    auto vs = m.virtual_subjects();
    for (std::size_t i = 0; i < vs.size(); ++i) CHECK(vs[i].id == i);
    CHECK(vs[0].subject_id == "s1");
    CHECK(vs[0].hand == Hand::left);

    CHECK(m.index_of("b-1") == 2);
    CHECK(m.index_of("zzz") == DatasetManifest::npos);
}

TEST_CASE("thumbs are excluded from the default protocol view") {
    auto entries = small_set();
    entries.push_back(entry("t-1", "s1", Hand::left, Finger::thumb, Phalanx::distal, 1));
    DatasetManifest m = DatasetManifest::from_entries(entries);
    CHECK(m.virtual_subjects().size() == 3);
    CHECK(m.virtual_subjects(true).size() == 4);
}

TEST_CASE("entry validation rejects bad records with the right fault") {
    SUBCASE("duplicate template_id") {
        auto es = small_set();
        es.push_back(es.front());
        es.back().impression = 3;
        es.back().session = 2;
        CHECK(fault_of(es) == ProtocolFault::duplicate_entry);
    }
    SUBCASE("duplicate capture slot under a fresh id") {
        auto es = small_set();
        auto dup = es.front();
        dup.template_id = "fresh";
        es.push_back(dup);
        CHECK(fault_of(es) == ProtocolFault::duplicate_entry);
    }
    SUBCASE("impression outside 1..4") {
        auto es = small_set();
        es[0].impression = 5;
        CHECK(fault_of(es) == ProtocolFault::range);
    }
    SUBCASE("session must pair with the impression") {
        auto es = small_set();
        es[0].session = 2;  // impression 1 demands session 1
        CHECK(fault_of(es) == ProtocolFault::range);
        es = small_set();
        es[3].session = 1;  // impression 3 demands session 2
        CHECK(fault_of(es) == ProtocolFault::range);
    }
    SUBCASE("nfiq outside 1..5") {
        auto es = small_set();
        es[1].nfiq = 0;
        CHECK(fault_of(es) == ProtocolFault::range);
        es = small_set();
        es[1].nfiq = 6;
        CHECK(fault_of(es) == ProtocolFault::range);
    }
    SUBCASE("ids cannot be empty or carry separator characters") {
        auto es = small_set();
        es[0].template_id = "";
        CHECK(fault_of(es) == ProtocolFault::range);
        es = small_set();
        es[0].template_id = "bad,id";
        CHECK(fault_of(es) == ProtocolFault::range);
        es = small_set();
        es[0].subject_id = "nl\nsubject";
        CHECK(fault_of(es) == ProtocolFault::range);
    }
}

TEST_CASE("save and load round-trip preserves every field") {
    testutil::TempDir tmp;
    auto es = small_set();
    es[2].nfiq = 5;
    es[2].file_path = "elsewhere/b1.fmr";
    DatasetManifest m = DatasetManifest::from_entries(es);
    save_manifest(m, tmp.path / "m.json");
    DatasetManifest back = load_manifest(tmp.path / "m.json");
    REQUIRE(back.size() == m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        const ManifestEntry &a = m.entry(i), &b = back.entry(i);
        CHECK(a.template_id == b.template_id);
        CHECK(a.subject_id == b.subject_id);
        CHECK(a.hand == b.hand);
        CHECK(a.finger == b.finger);
        CHECK(a.phalanx == b.phalanx);
        CHECK(a.impression == b.impression);
        CHECK(a.session == b.session);
        CHECK(a.nfiq == b.nfiq);
        CHECK(a.file_path == b.file_path);
    }
    CHECK(back.content_hash() == m.content_hash());
}

TEST_CASE("content hash reacts to any field change") {
    DatasetManifest base = DatasetManifest::from_entries(small_set());
    auto changed = small_set();
    changed[0].nfiq = 4;
    CHECK(DatasetManifest::from_entries(changed).content_hash() != base.content_hash());
    changed = small_set();
    changed[3].file_path = "x";
    CHECK(DatasetManifest::from_entries(changed).content_hash() != base.content_hash());
    changed = small_set();
    changed[1].template_id = "a-2b";
    CHECK(DatasetManifest::from_entries(changed).content_hash() != base.content_hash());
    // Same content, same hash.
    CHECK(DatasetManifest::from_entries(small_set()).content_hash() == base.content_hash());
}

TEST_CASE("manifest JSON schema errors are explicit") {
    testutil::TempDir tmp;
    auto write = [&](const char* name, const std::string& text) {
        testutil::write_text(tmp.path / name, text);
        return tmp.path / name;
    };

    CHECK_THROWS_AS(load_manifest(tmp.path / "missing.json"), ProtocolError);

    auto object_top = write("o.json", "{}");
    try {
        load_manifest(object_top);
        FAIL_CHECK("expected schema error");
    } catch (const ProtocolError& e) {
        CHECK(e.fault() == ProtocolFault::schema);
    }

    auto bad_json = write("bad.json", "[{");
    CHECK_THROWS_AS(load_manifest(bad_json), ProtocolError);

    std::string good =
        R"([{"template_id":"x","subject_id":"s","hand":"left","finger":"index",)"
        R"("phalanx":1,"impression":1,"session":1,"nfiq":3,"file_path":"x.fmr"}])";

    auto unknown_key = write("uk.json",
                             R"([{"template_id":"x","subject_id":"s","hand":"left",)"
                             R"("finger":"index","phalanx":1,"impression":1,"session":1,)"
                             R"("nfiq":3,"file_path":"x.fmr","extra":1}])");
    try {
        load_manifest(unknown_key);
        FAIL_CHECK("expected schema error");
    } catch (const ProtocolError& e) {
        CHECK(e.fault() == ProtocolFault::schema);
    }

    auto missing_key = write("mk.json",
                             R"([{"template_id":"x","subject_id":"s","hand":"left",)"
                             R"("finger":"index","phalanx":1,"impression":1,"session":1,)"
                             R"("nfiq":3}])");
    try {
        load_manifest(missing_key);
        FAIL_CHECK("expected schema error");
    } catch (const ProtocolError& e) {
        CHECK(e.fault() == ProtocolFault::schema);
    }

    auto wrong_type = write("wt.json",
                            R"([{"template_id":"x","subject_id":"s","hand":"left",)"
                            R"("finger":"index","phalanx":"one","impression":1,"session":1,)"
                            R"("nfiq":3,"file_path":"x.fmr"}])");
    try {
        load_manifest(wrong_type);
        FAIL_CHECK("expected schema error");
    } catch (const ProtocolError& e) {
        CHECK(e.fault() == ProtocolFault::schema);
    }

    auto bad_enum = write("be.json",
                          R"([{"template_id":"x","subject_id":"s","hand":"upper",)"
                          R"("finger":"index","phalanx":1,"impression":1,"session":1,)"
                          R"("nfiq":3,"file_path":"x.fmr"}])");
    try {
        load_manifest(bad_enum);
        FAIL_CHECK("expected range error");
    } catch (const ProtocolError& e) {
        CHECK(e.fault() == ProtocolFault::range);
    }

    CHECK_NOTHROW(load_manifest(write("ok.json", good)));
}
