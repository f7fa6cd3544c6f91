#include <doctest.h>

#include <algorithm>
#include <set>

#include "openreid/error.hpp"
#include "openreid/mining_filter.hpp"
#include "openreid/random.hpp"
#include "openreid/synth.hpp"

using namespace openreid;

namespace {

std::vector<CorpusRecord> random_corpus(std::size_t n, std::uint64_t seed, bool coarse = false) {
    Rng rng(seed);
    std::vector<CorpusRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = coarse ? static_cast<double>(rng.below(10)) / 10.0 : rng.uniform();
        out.push_back({"img" + std::to_string(i), "src/v" + std::to_string(i % 17), static_cast<std::int64_t>(i), 1,
                       "src", c});
    }
    return out;
}

std::set<std::string> ids(const std::vector<CorpusRecord>& rs) {
    std::set<std::string> s;
    for (const auto& r : rs) s.insert(r.image_id);
    return s;
}

}  // namespace

TEST_CASE("rounding helpers snap near-integers") {
    CHECK(ceil_count(0.2, 30000) == 6000);
    CHECK(floor_count(0.5, 6000) == 3000);
    CHECK(ceil_count(0.1, 30) == 3);  // 0.1 * 30 = 3.0000000000000004
    CHECK(floor_count(0.7, 10) == 7);  // 0.7 * 10 = 6.999999999999999
    CHECK(ceil_count(0.25, 10) == 3);
    CHECK(floor_count(0.25, 10) == 2);
    CHECK(ceil_count(1.0, 0) == 0);
}

TEST_CASE("filter_corpus sizes and ordering") {
    const auto corpus = random_corpus(30000, 1);
    const auto out = filter_corpus(corpus, 0.2, 0.5, 7);
    CHECK(out.size() == 3000);
    CHECK(std::is_sorted(out.begin(), out.end(),
                         [](const auto& a, const auto& b) { return a.image_id < b.image_id; }));

    // Every retained confidence is at or above the stage-1 cutoff, i.e. the
    // 6000th largest score, computed here independently from the raw scores.
    std::vector<double> scores;
    for (const auto& r : corpus) scores.push_back(r.confidence);
    std::sort(scores.begin(), scores.end(), std::greater<>());
    const double cutoff = scores[5999];
    for (const auto& r : out) CHECK(r.confidence >= cutoff);
    // ...and the 80th percentile of uniform scores is near 0.8.
    CHECK(cutoff == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("filter_corpus identity and empty input") {
    const auto corpus = random_corpus(500, 2);
    const auto out = filter_corpus(corpus, 1.0, 1.0, 3);
    CHECK(ids(out) == ids(corpus));
    CHECK(out.size() == corpus.size());
    CHECK(filter_corpus({}, 0.2, 0.5, 1).empty());
}

TEST_CASE("filter_corpus errors") {
    const auto corpus = random_corpus(10, 2);
    CHECK_THROWS_AS(filter_corpus(corpus, 0.0, 0.5, 1), ValidationError);
    CHECK_THROWS_AS(filter_corpus(corpus, 0.5, 1.5, 1), ValidationError);
    auto dup = corpus;
    dup[3].image_id = dup[8].image_id;
    CHECK_THROWS_AS(filter_corpus(dup, 0.5, 0.5, 1), ValidationError);
    auto bad = corpus;
    bad[0].confidence = -0.1;
    CHECK_THROWS_AS(filter_corpus(bad, 0.5, 0.5, 1), ValidationError);
}

TEST_CASE("filter_corpus properties") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = rng.below(400);
        const double keep = rng.uniform(0.01, 1.0), sub = rng.uniform(0.01, 1.0);
        const auto corpus = random_corpus(n, trial, trial % 2 == 0);
        const auto out = filter_corpus(corpus, keep, sub, trial);

        CHECK(out == filter_corpus(corpus, keep, sub, trial));
        CHECK(out.size() == floor_count(sub, ceil_count(keep, n)));

        const auto all = ids(corpus);
        for (const auto& r : out) CHECK(all.count(r.image_id));

        // Stage-1 survivors outrank everything stage 1 dropped.
        auto ranked = corpus;
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return a.confidence != b.confidence ? a.confidence > b.confidence : a.image_id < b.image_id;
        });
        const std::size_t kept = ceil_count(keep, n);
        for (const auto& r : out) {
            for (std::size_t i = kept; i < ranked.size(); ++i) CHECK(r.confidence >= ranked[i].confidence);
        }
    }
}

TEST_CASE("different seeds give different subsamples") {
    const auto corpus = random_corpus(1000, 9);
    CHECK(ids(filter_corpus(corpus, 0.5, 0.5, 1)) != ids(filter_corpus(corpus, 0.5, 0.5, 2)));
}

TEST_CASE("per-source policy") {
    const std::vector<synth::CorpusShape> shapes{{"panaf", 20, 2000, 2}, {"loma", 5, 300, 1}};
    const auto corpus = synth::corpus(shapes, 4);
    const auto records = corpus_from_tracks(corpus.tracks);

    FilterPolicy policy;
    policy.per_source["panaf"] = {0.2, 0.5};
    const auto out = filter_by_source(records, policy, 11);
    const auto stats = corpus_stats(records, out);
    REQUIRE(stats.size() == 2);
    CHECK(stats[0].source == "loma");
    CHECK(stats[0].filtered_detections == 300);
    CHECK(stats[1].source == "panaf");
    CHECK(stats[1].filtered_detections == 200);

    // Adding a source leaves existing sources' picks unchanged.
    const std::vector<synth::CorpusShape> more{{"panaf", 20, 2000, 2}, {"loma", 5, 300, 1}, {"bossou", 3, 90, 1}};
    const auto bigger = corpus_from_tracks(synth::corpus(more, 4).tracks);
    std::vector<CorpusRecord> panaf_only;
    for (const auto& r : filter_by_source(bigger, policy, 11)) {
        if (r.source == "panaf") panaf_only.push_back(r);
    }
    std::vector<CorpusRecord> panaf_before;
    for (const auto& r : out) {
        if (r.source == "panaf") panaf_before.push_back(r);
    }
    CHECK(ids(panaf_only) == ids(panaf_before));
}

TEST_CASE("corpus_stats examples") {
    CHECK(corpus_stats({}, {}).empty());

    const std::vector<CorpusRecord> raw{{"a", "x/v1", 0, 1, "x", 0.5}, {"b", "x/v1", 0, 2, "x", 0.5},
                                        {"c", "x/v2", 3, 1, "x", 0.5}, {"d", "y/v1", 0, 1, "y", 0.5}};
    const std::vector<CorpusRecord> kept{raw[0], raw[3]};
    const auto stats = corpus_stats(raw, kept);
    REQUIRE(stats.size() == 2);
    CHECK(stats[0] == CorpusStats{"x", 2, 2, 3, 1});
    CHECK(stats[1] == CorpusStats{"y", 1, 1, 1, 1});
}

TEST_CASE("PanAf-shaped synthetic corpus stats equal the generator's") {
    // 20473 videos / 100, 3.0M raw detections / 100.
    const std::vector<synth::CorpusShape> shapes{{"panaf", 205, 30000, 2}, {"loma", 5, 3000, 1}};
    const auto corpus = synth::corpus(shapes, 1);
    const auto records = corpus_from_tracks(corpus.tracks);
    const auto stats = corpus_stats(records, {});
    REQUIRE(stats.size() == corpus.expected.size());
    for (std::size_t i = 0; i < stats.size(); ++i) CHECK(stats[i] == corpus.expected[i]);
    CHECK(stats[1].videos == 205);
    CHECK(stats[1].raw_detections == 30000);
}

TEST_CASE("source and image id helpers") {
    CHECK(source_of("panaf/abc") == "panaf");
    CHECK(source_of("plain") == "default");
    CHECK(image_id_of({{"loma/v1", 42, {0, 0, 1, 1}, 0.5}, 3}) == "loma/v1:000042:t3");
}
