#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "andlantis/error.hpp"
#include "andlantis/forensics.hpp"
#include "andlantis/hashing.hpp"
#include "fs_gen.hpp"
#include "oracles.hpp"

using namespace andlantis::forensics;
namespace fs = std::filesystem;

namespace {

std::set<std::string> paths(const std::vector<FileRecord> &v) {
    std::set<std::string> out;
    for (const auto &r : v) {
        out.insert(r.path);
    }
    return out;
}
std::set<std::string> paths(const std::vector<RecordPair> &v) {
    std::set<std::string> out;
    for (const auto &r : v) {
        out.insert(r.post.path);
    }
    return out;
}

} // namespace

TEST_CASE("digest test vectors") {
    CHECK(md5_hex("") == "d41d8cd98f00b204e9800998ecf8427e");
    CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(digest_all("abc").md5 == "900150983cd24fb0d6963f7d28e17f72");
}

TEST_CASE("classify by magic bytes") {
    CHECK(classify(std::string("PK\x03\x04rest", 8)) == "zip/apk");
    CHECK(classify(std::string("SQLite format 3\0more", 20)) == "sqlite");
    CHECK(classify("") == "binary");
    CHECK(classify("plain ascii text\n") == "text");
    CHECK(classify(std::string("\x01\x02\x03\xff\xfe", 5)) == "binary");
}

TEST_CASE("diff of a snapshot with itself is empty") {
    std::mt19937_64 rng(3);
    auto s = fsgen::random_script(rng);
    auto snap = snapshot(s.post);
    CHECK(diff(snap, snap).empty());
    CHECK(snapshot(VirtualFs{}).files.empty());
}

TEST_CASE("snapshot record count matches file count") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        auto s = fsgen::random_script(rng);
        auto snap = snapshot(s.post);
        CHECK(snap.files.size() == s.post.files().size());
        for (const auto &[p, f] : s.post.files()) {
            REQUIRE(snap.files.contains(p));
            CHECK(snap.files.at(p).sha256 == sha256_hex(f.content));
            CHECK(snap.files.at(p).stat == f.stat);
        }
    }
}

TEST_CASE("randomized mutation scripts: diff equals set algebra, round trip holds") {
    std::mt19937_64 rng(20240601);
    for (int trial = 0; trial < 300; ++trial) {
        auto s = fsgen::random_script(rng);
        const auto d = diff(snapshot(s.base), snapshot(s.post));
        const auto want = s.model.expected();
        CHECK(paths(d.created) == want.created);
        CHECK(paths(d.deleted) == want.deleted);
        CHECK(paths(d.modified) == want.modified);
        CHECK(paths(d.metadata_changed) == want.metadata);
        const auto alg = oracle::diff_sets(s.base, s.post);
        CHECK(alg.metadata == want.metadata);

        auto store = extract_artifacts(d, s.post);
        CHECK(store.size() == d.created.size() + d.modified.size());
        for (const auto &r : d.created) {
            CHECK(sha256_hex(store.at(r.path)) == r.sha256);
            CHECK(md5_hex(store.at(r.path)) == r.md5);
        }
        VirtualFs rebuilt = s.base;
        for (const auto &r : d.deleted) {
            rebuilt.remove(r.path);
        }
        for (const auto &[p, bytes] : store) {
            rebuilt.write(p, bytes, {}, 0);
        }
        CHECK(rebuilt.same_content(s.post));
    }
}

TEST_CASE("artifact store sizes") {
    VirtualFs base;
    base.write("/a", "1", {}, 1);
    base.write("/b", "2", {}, 1);
    base.write("/c", "3", {}, 1);
    VirtualFs post = base;
    post.write("/new", "n", {}, 2);
    post.write("/a", "changed", {}, 2);
    post.remove("/b");
    const auto d = diff(snapshot(base), snapshot(post));
    CHECK(extract_artifacts(d, post).size() == 2);
    CHECK(extract_artifacts(FsDiff{}, post).empty());
    // source changed under the diff
    VirtualFs tampered = post;
    tampered.write("/new", "other", {}, 3);
    CHECK_THROWS_AS(extract_artifacts(d, tampered), andlantis::IntegrityError);
}

TEST_CASE("portable metadata ignores dev, ino and ctime") {
    StatBlock a;
    a.mode = 0100644;
    a.mtime = 5;
    StatBlock b = a;
    b.dev = 9;
    b.ino = 77;
    b.ctime = 123;
    b.atime = 400;
    CHECK(same_metadata(a, b, MetadataCompare::Portable));
    CHECK_FALSE(same_metadata(a, b, MetadataCompare::Full));
    b.mtime = 6;
    CHECK_FALSE(same_metadata(a, b, MetadataCompare::Portable));
}

TEST_CASE("report serialization round trip") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = fsgen::random_script(rng);
        const auto d = diff(snapshot(s.base), snapshot(s.post));
        const auto store = extract_artifacts(d, s.post);
        ReportInputs in;
        in.job_id = "job-" + std::to_string(trial);
        in.diff = &d;
        in.artifacts = &store;
        in.root_flag = trial % 2 == 0;
        in.net_summary = {3, 3, {"a.example", "b.example"}};
        in.interaction_steps = trial;
        const auto text = emit_report(in);
        const auto doc = parse_report(text);
        CHECK(serialize_report(doc) == text);
        CHECK(doc == build_report(in));
        CHECK(doc.created.size() == d.created.size());
        for (std::size_t i = 0; i < d.created.size(); ++i) {
            CHECK(doc.created[i].record == d.created[i]);
            CHECK(doc.created[i].type_tag == classify(store.at(d.created[i].path)));
        }
    }
}

TEST_CASE("empty report is schema complete") {
    const FsDiff d;
    ReportInputs in;
    in.job_id = "job-00001";
    in.diff = &d;
    const auto j = nlohmann::json::parse(emit_report(in));
    for (const char *k : {"job_id", "root_flag", "created", "modified", "metadata_changed", "deleted", "net_summary",
                          "interaction_steps", "crash"}) {
        CHECK(j.contains(k));
    }
    CHECK(j["created"].empty());
    CHECK(j["net_summary"]["hosts"].empty());
}

TEST_CASE("record json has the thirteen stat fields") {
    StatBlock st;
    st.mode = 0100644;
    st.size = 3;
    const auto rec = make_record("/x", "abc", st);
    const auto j = nlohmann::json::parse(serialize_record(rec));
    CHECK(j.size() == 5);
    CHECK(j["stat"].size() == 13);
    CHECK(parse_record(serialize_record(rec)) == rec);
}

TEST_CASE("real directory snapshot and diff") {
    const fs::path root = fs::temp_directory_path() / "andlantis_fs_test";
    fs::remove_all(root);
    fs::create_directories(root / "base/sub");
    fs::create_directories(root / "post/sub");
    auto put = [](const fs::path &p, const std::string &s) { std::ofstream(p, std::ios::binary) << s; };
    put(root / "base/sub/keep", "same");
    put(root / "base/gone", "bye");
    put(root / "post/sub/keep", "same");
    put(root / "post/new.apk", std::string("PK\x03\x04zz", 6));

    std::size_t walked = 0;
    for (const auto &e : fs::recursive_directory_iterator(root / "post")) {
        walked += e.is_regular_file();
    }
    const auto post = snapshot(root / "post");
    CHECK(post.files.size() == walked);
    CHECK(post.files.contains("/sub/keep"));
    CHECK(std::find(post.other_paths.begin(), post.other_paths.end(), "/sub") != post.other_paths.end());

    DiffOptions opts;
    opts.metadata = MetadataCompare::Portable;
    const auto d = diff(snapshot(root / "base"), post, opts);
    CHECK(paths(d.created) == std::set<std::string>{"/new.apk"});
    CHECK(paths(d.deleted) == std::set<std::string>{"/gone"});
    CHECK(d.modified.empty());
    const auto store = extract_artifacts(d, root / "post");
    CHECK(classify(store.at("/new.apk")) == "zip/apk");
    fs::remove_all(root);
}
