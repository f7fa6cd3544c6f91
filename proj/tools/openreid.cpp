// openreid: command-line front end for the tracking, mining and evaluation pipeline.
//
//   openreid synth embeddings --preset bossou9 --out bossou9.cfe
//   openreid eval-reid --store bossou9.cfe --mode track --report reid.json
//
// Every subcommand writes `<output>.config.json` next to its main output with
// the full set of resolved parameters. Exit codes: 0 ok, 1 invalid input,
// 2 I/O failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "openreid/embedding_store.hpp"
#include "openreid/error.hpp"
#include "openreid/eval_protocols.hpp"
#include "openreid/mining_filter.hpp"
#include "openreid/records_io.hpp"
#include "openreid/synth.hpp"
#include "openreid/track_engine.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace openreid;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, a, b);
    return buf;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void echo_config(const fs::path& output, const std::string& subcommand, json params) {
    json j;
    j["tool"] = "openreid";
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["params"] = std::move(params);
    write_json(fs::path(output.string() + ".config.json"), j);
}

json to_json(const MeanStd& ms) { return json{{"mean", ms.mean}, {"std", ms.std}}; }

json to_json(const CorpusRecord& r) {
    return json{{"image_id", r.image_id}, {"video_id", r.video_id}, {"frame", r.frame},
                {"track_id", r.track_id}, {"source", r.source},     {"confidence", r.confidence}};
}

json to_json(const CorpusStats& s) {
    return json{{"source", s.source},
                {"videos", s.videos},
                {"frames", s.frames},
                {"raw_detections", s.raw_detections},
                {"filtered_detections", s.filtered_detections}};
}

std::vector<std::size_t> parse_k_values(const std::string& text) {
    std::vector<std::size_t> ks;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const long v = std::stol(item, &used);
            if (used != item.size() || v <= 0) throw std::invalid_argument(item);
            ks.push_back(static_cast<std::size_t>(v));
        } catch (const std::logic_error&) {
            throw ValidationError("--k-values: '" + item + "' is not a positive integer");
        }
    }
    if (ks.empty()) throw ValidationError("--k-values is empty");
    std::set<std::size_t> seen(ks.begin(), ks.end());
    if (seen.size() != ks.size()) throw ValidationError("--k-values contains duplicates");
    return ks;
}

// "source=keep:subsample"
std::pair<std::string, FilterFractions> parse_source_fractions(const std::string& text) {
    const auto eq = text.find('=');
    const auto colon = text.find(':', eq == std::string::npos ? 0 : eq);
    if (eq == std::string::npos || eq == 0 || colon == std::string::npos) {
        throw ValidationError("--source-fractions expects source=keep:subsample, got '" + text + "'");
    }
    try {
        return {text.substr(0, eq), {std::stod(text.substr(eq + 1, colon - eq - 1)), std::stod(text.substr(colon + 1))}};
    } catch (const std::logic_error&) {
        throw ValidationError("--source-fractions: bad number in '" + text + "'");
    }
}

// "source:videos:detections:faces_per_frame"
synth::CorpusShape parse_shape(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 4 || parts[0].empty()) {
        throw ValidationError("--shape expects source:videos:detections:faces_per_frame, got '" + text + "'");
    }
    try {
        return {parts[0], std::stoul(parts[1]), std::stoul(parts[2]), std::stoul(parts[3])};
    } catch (const std::logic_error&) {
        throw ValidationError("--shape: bad number in '" + text + "'");
    }
}

// --- track -------------------------------------------------------------------

struct TrackArgs {
    std::string detections;
    std::string out;
    TrackerConfig config;
};

void cmd_track(const TrackArgs& a) {
    a.config.validate();
    const auto detections = read_detections(a.detections);
    const auto tracks = run_tracker(detections, a.config);
    write_tracks(a.out, tracks);

    std::set<std::pair<std::string, std::int64_t>> ids;
    for (const auto& t : tracks) ids.emplace(t.detection.video_id, t.track_id);
    std::cout << "detections " << detections.size() << "  tracked " << tracks.size() << "  tracks " << ids.size()
              << "\n";

    const auto& c = a.config;
    echo_config(a.out, "track",
                {{"detections", a.detections},
                 {"out", a.out},
                 {"tau_high", c.tau_high},
                 {"tau_low", c.tau_low},
                 {"iou_high", c.iou_high},
                 {"iou_low", c.iou_low},
                 {"iou_tentative", c.iou_tentative},
                 {"min_hits", c.min_hits},
                 {"max_lost", c.max_lost}});
}

// --- filter ------------------------------------------------------------------

struct FilterArgs {
    std::string tracks;
    std::string out;
    std::string stats;
    double keep = 0.2;
    double subsample = 0.5;
    std::vector<std::string> source_fractions;
    std::uint64_t seed = 0;
};

void cmd_filter(const FilterArgs& a) {
    FilterPolicy policy;
    policy.fallback = {a.keep, a.subsample};
    for (const auto& s : a.source_fractions) policy.per_source.insert(parse_source_fractions(s));

    const auto tracks = read_tracks(a.tracks);
    const auto raw = corpus_from_tracks(tracks);
    const auto kept = filter_by_source(raw, policy, a.seed);
    const auto stats = corpus_stats(raw, kept);

    std::string manifest;
    for (const auto& r : kept) manifest += to_json(r).dump() + "\n";
    write_text(a.out, manifest);

    const fs::path stats_path = a.stats.empty() ? fs::path(a.out + ".stats.json") : fs::path(a.stats);
    json rows = json::array();
    for (const auto& s : stats) rows.push_back(to_json(s));
    write_json(stats_path, json{{"sources", rows}});

    std::printf("%-12s %8s %10s %10s %10s\n", "Source", "Videos", "Frames", "Raw", "Filtered");
    for (const auto& s : stats) {
        std::printf("%-12s %8zu %10zu %10zu %10zu\n", s.source.c_str(), s.videos, s.frames, s.raw_detections,
                    s.filtered_detections);
    }

    json per_source = json::object();
    for (const auto& [src, f] : policy.per_source) per_source[src] = {{"keep", f.keep}, {"subsample", f.subsample}};
    echo_config(a.out, "filter",
                {{"tracks", a.tracks},
                 {"out", a.out},
                 {"stats", stats_path.string()},
                 {"keep_fraction", a.keep},
                 {"subsample_fraction", a.subsample},
                 {"source_fractions", per_source},
                 {"seed", a.seed}});
}

// --- eval-reid ---------------------------------------------------------------

struct ReidArgs {
    std::string store;
    std::string report;
    std::string mode = "track";
    SplitParams params;
    std::string k_values = "1,3,5,7,10,20,50";
    std::size_t repetitions = 10;
    std::uint64_t seed = 0;
};

void cmd_eval_reid(const ReidArgs& a) {
    const auto mode = parse_split_mode(a.mode);
    const auto ks = parse_k_values(a.k_values);
    const auto store = load_store(a.store);
    const auto r = run_reid_protocol(store, mode, a.params, ks, a.seed, a.repetitions);

    json per_k = json::array();
    for (std::size_t i = 0; i < ks.size(); ++i) {
        per_k.push_back({{"k", ks[i]}, {"selection_accuracy", r.selection_accuracy[i]}, {"mean", r.per_k[i].mean},
                         {"std", r.per_k[i].std}});
    }
    write_json(a.report, {{"protocol", "reid"},
                          {"mode", to_string(r.mode)},
                          {"seed", r.seed},
                          {"repetitions", r.repetitions},
                          {"identities", r.identities},
                          {"gallery_size", r.gallery_size},
                          {"query_size", r.query_size},
                          {"per_k", per_k},
                          {"chosen_k", r.chosen_k},
                          {"accuracy", to_json(r.accuracy)}});

    std::printf("Re-identification, %s split, %zu repetitions, seed %llu\n", to_string(r.mode), r.repetitions,
                static_cast<unsigned long long>(r.seed));
    std::printf("%6s %9s %9s\n", "IDs", "Gallery", "Queries");
    std::printf("%6zu %9zu %9zu\n\n", r.identities, r.gallery_size, r.query_size);
    std::printf("%6s %12s %16s\n", "k", "selection", "accuracy (%)");
    for (std::size_t i = 0; i < ks.size(); ++i) {
        std::printf("%6zu %12s %16s%s\n", ks[i], fmt("%.1f", 100 * r.selection_accuracy[i]).c_str(),
                    fmt("%.1f +- %.1f", 100 * r.per_k[i].mean, 100 * r.per_k[i].std).c_str(),
                    ks[i] == r.chosen_k ? "  <- chosen" : "");
    }

    echo_config(a.report, "eval-reid",
                {{"store", a.store},
                 {"report", a.report},
                 {"mode", to_string(mode)},
                 {"gallery_tracks", a.params.gallery_tracks},
                 {"query_tracks", a.params.query_tracks},
                 {"frames_per_track", a.params.frames_per_track},
                 {"min_portraits", a.params.min_portraits},
                 {"k_values", ks},
                 {"repetitions", a.repetitions},
                 {"seed", a.seed}});
}

// --- eval-verify -------------------------------------------------------------

struct VerifyArgs {
    std::string store;
    std::string report;
    std::string pairs;
    std::string mode = "track";
    std::size_t min_tracks = 0;  // 0: smallest track count in the store
    std::size_t negative_sets = 10;
    std::uint64_t seed = 0;
};

void cmd_eval_verify(const VerifyArgs& a) {
    const auto mode = parse_split_mode(a.mode);
    const auto store = load_store(a.store);
    const std::optional<std::size_t> min_tracks = a.min_tracks ? std::optional(a.min_tracks) : std::nullopt;
    const auto set = build_verification_pairs(store.metadata(), mode, min_tracks, a.seed);
    const auto r = eval_verification(set, store, a.negative_sets);

    std::set<std::string> identities;
    for (auto row : set.images) identities.insert(*store.meta(row).identity);

    if (!a.pairs.empty()) {
        std::string lines;
        for (const auto& p : set.pairs) {
            lines += json{{"a", store.meta(p.a).image_id}, {"b", store.meta(p.b).image_id}, {"same", p.same}}.dump() +
                     "\n";
        }
        write_text(a.pairs, lines);
    }

    write_json(a.report, {{"protocol", "verification"},
                          {"mode", to_string(mode)},
                          {"seed", a.seed},
                          {"identities", identities.size()},
                          {"images", r.images},
                          {"positives", r.positives},
                          {"negatives_per_set", r.negatives_per_set},
                          {"negative_sets", a.negative_sets},
                          {"auc_per_set", r.auc_per_set},
                          {"auc", to_json(r.auc)}});

    std::printf("Verification, %s mode, %zu negative sets, seed %llu\n", to_string(mode), a.negative_sets,
                static_cast<unsigned long long>(a.seed));
    std::printf("%6s %8s %8s %14s\n", "IDs", "Images", "+/-", "ROC-AUC (%)");
    std::printf("%6zu %8zu %8zu %14s\n", identities.size(), r.images, r.positives,
                fmt("%.1f +- %.1f", 100 * r.auc.mean, 100 * r.auc.std).c_str());

    echo_config(a.report, "eval-verify",
                {{"store", a.store},
                 {"report", a.report},
                 {"pairs", a.pairs},
                 {"mode", to_string(mode)},
                 {"min_tracks", a.min_tracks},
                 {"negative_sets", a.negative_sets},
                 {"seed", a.seed}});
}

// --- synth -------------------------------------------------------------------

struct SynthDetectionsArgs {
    std::string scenario = "random";
    std::string out;
    synth::StreamParams stream;
    std::size_t frames = 10;
};

void cmd_synth_detections(const SynthDetectionsArgs& a) {
    std::vector<Detection> dets;
    if (a.scenario == "single") {
        dets = synth::single_object(a.frames);
    } else if (a.scenario == "dip") {
        dets = synth::confidence_dip(a.frames);
    } else if (a.scenario == "isolated") {
        dets = synth::isolated();
    } else if (a.scenario == "random") {
        dets = synth::random_stream(a.stream);
    } else {
        throw ValidationError("unknown scenario '" + a.scenario + "' (single, dip, isolated, random)");
    }
    write_detections(a.out, dets);
    std::cout << "detections " << dets.size() << "\n";

    json params{{"scenario", a.scenario}, {"out", a.out}};
    if (a.scenario == "random") {
        params.update({{"videos", a.stream.videos},
                       {"frames", a.stream.frames},
                       {"objects", a.stream.objects},
                       {"dip_probability", a.stream.dip_probability},
                       {"miss_probability", a.stream.miss_probability},
                       {"false_positive_rate", a.stream.false_positive_rate},
                       {"seed", a.stream.seed}});
    } else if (a.scenario != "isolated") {
        params["frames"] = a.frames;
    }
    echo_config(a.out, "synth detections", params);
}

struct SynthCorpusArgs {
    std::vector<std::string> shapes;
    std::string out;
    std::uint64_t seed = 0;
};

void cmd_synth_corpus(const SynthCorpusArgs& a) {
    std::vector<synth::CorpusShape> shapes;
    for (const auto& s : a.shapes) shapes.push_back(parse_shape(s));
    if (shapes.empty()) shapes.emplace_back();
    const auto corpus = synth::corpus(shapes, a.seed);
    write_tracks(a.out, corpus.tracks);
    std::cout << "tracked detections " << corpus.tracks.size() << "\n";

    json shape_list = json::array();
    for (const auto& s : shapes) {
        shape_list.push_back({{"source", s.source},
                              {"videos", s.videos},
                              {"detections", s.detections},
                              {"faces_per_frame", s.faces_per_frame}});
    }
    echo_config(a.out, "synth corpus", {{"out", a.out}, {"shapes", shape_list}, {"seed", a.seed}});
}

struct SynthEmbeddingsArgs {
    std::string preset = "bossou9";
    std::string out;
    std::size_t dim = 64;
    std::size_t identities = 3;
    std::size_t tracks = 20;
    std::size_t frames = 10;
    synth::ClusterNoise noise;
    double portrait_noise = 1.7;
    std::uint64_t seed = 0;
};

void cmd_synth_embeddings(const SynthEmbeddingsArgs& a) {
    json params{{"preset", a.preset}, {"out", a.out}, {"dim", a.dim}, {"seed", a.seed}};
    const auto store = [&] {
        if (a.preset == "bossou9") {
            params.update({{"track_noise", a.noise.track}, {"frame_noise", a.noise.frame}});
            return synth::bossou9_like(a.dim, a.seed, a.noise);
        }
        if (a.preset == "petface") {
            params["noise"] = a.portrait_noise;
            return synth::petface_like(a.dim, a.seed, a.portrait_noise);
        }
        if (a.preset == "clusters") {
            params.update({{"identities", a.identities},
                           {"tracks", a.tracks},
                           {"frames", a.frames},
                           {"track_noise", a.noise.track},
                           {"frame_noise", a.noise.frame}});
            const std::vector<std::size_t> tracks(a.identities, a.tracks);
            return synth::track_embeddings(tracks, a.frames, a.dim, a.noise, a.seed);
        }
        throw ValidationError("unknown preset '" + a.preset + "' (bossou9, petface, clusters)");
    }();
    save_store(store, a.out);
    std::cout << "rows " << store.size() << "  dim " << store.dimension() << "\n";
    echo_config(a.out, "synth embeddings", params);
}

int run(int argc, char** argv) {
    CLI::App app{"Face re-identification pipeline: tracking, corpus filtering and evaluation protocols."};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    TrackArgs track;
    auto* t = app.add_subcommand("track", "Link detections into tracks (two-stage association).");
    t->add_option("--detections", track.detections, "Detection JSONL file")->required()->check(CLI::ExistingFile);
    t->add_option("--out", track.out, "Output track JSONL file")->required();
    t->add_option("--tau-high", track.config.tau_high, "High-confidence threshold")->capture_default_str();
    t->add_option("--tau-low", track.config.tau_low, "Low-confidence threshold")->capture_default_str();
    t->add_option("--iou-high", track.config.iou_high, "Minimum IoU, first stage")->capture_default_str();
    t->add_option("--iou-low", track.config.iou_low, "Minimum IoU, low-score stage")->capture_default_str();
    t->add_option("--iou-tentative", track.config.iou_tentative, "Minimum IoU for unconfirmed tracks")
        ->capture_default_str();
    t->add_option("--min-hits", track.config.min_hits, "Matches before a track is reported")->capture_default_str();
    t->add_option("--max-lost", track.config.max_lost, "Frames a lost track survives")->capture_default_str();
    t->callback([&] { cmd_track(track); });

    FilterArgs filter;
    auto* f = app.add_subcommand("filter", "Keep the most confident crops, then subsample.");
    f->add_option("--tracks", filter.tracks, "Track JSONL file")->required()->check(CLI::ExistingFile);
    f->add_option("--out", filter.out, "Output manifest JSONL file")->required();
    f->add_option("--stats", filter.stats, "Stats JSON (default: <out>.stats.json)");
    f->add_option("--keep-fraction", filter.keep, "Fraction kept by confidence")->capture_default_str();
    f->add_option("--subsample-fraction", filter.subsample, "Fraction of survivors sampled")->capture_default_str();
    f->add_option("--source-fractions", filter.source_fractions, "Per-source override, source=keep:subsample");
    f->add_option("--seed", filter.seed, "Sampling seed")->capture_default_str();
    f->callback([&] { cmd_filter(filter); });

    ReidArgs reid;
    auto* r = app.add_subcommand("eval-reid", "Class-averaged k-NN re-identification accuracy.");
    r->add_option("--store", reid.store, "Embedding store (.cfe)")->required();
    r->add_option("--report", reid.report, "Output report JSON")->required();
    r->add_option("--mode", reid.mode, "track or portrait")->capture_default_str();
    r->add_option("--gallery-tracks", reid.params.gallery_tracks, "Gallery tracks per identity")
        ->capture_default_str();
    r->add_option("--query-tracks", reid.params.query_tracks, "Query tracks per identity")->capture_default_str();
    r->add_option("--frames-per-track", reid.params.frames_per_track, "Frames sampled per track")
        ->capture_default_str();
    r->add_option("--min-portraits", reid.params.min_portraits, "Minimum images per identity (portrait mode)")
        ->capture_default_str();
    r->add_option("--k-values", reid.k_values, "Comma-separated neighbour counts")->capture_default_str();
    r->add_option("--repetitions", reid.repetitions, "Reported random splits")->capture_default_str();
    r->add_option("--seed", reid.seed, "Split seed")->capture_default_str();
    r->callback([&] { cmd_eval_reid(reid); });

    VerifyArgs verify;
    auto* v = app.add_subcommand("eval-verify", "Pairwise verification ROC-AUC.");
    v->add_option("--store", verify.store, "Embedding store (.cfe)")->required();
    v->add_option("--report", verify.report, "Output report JSON")->required();
    v->add_option("--pairs", verify.pairs, "Also write the pair list (JSONL)");
    v->add_option("--mode", verify.mode, "track or portrait")->capture_default_str();
    v->add_option("--min-tracks", verify.min_tracks, "Tracks kept per identity (0: smallest count)")
        ->capture_default_str();
    v->add_option("--negative-sets", verify.negative_sets, "Independent negative sets")->capture_default_str();
    v->add_option("--seed", verify.seed, "Sampling seed")->capture_default_str();
    v->callback([&] { cmd_eval_verify(verify); });

    auto* s = app.add_subcommand("synth", "Generate synthetic fixtures.");
    s->require_subcommand(1);

    SynthDetectionsArgs sd;
    auto* sdc = s->add_subcommand("detections", "Detection stream JSONL.");
    sdc->add_option("--scenario", sd.scenario, "single, dip, isolated or random")->capture_default_str();
    sdc->add_option("--out", sd.out, "Output detection JSONL file")->required();
    sdc->add_option("--frames", sd.frames, "Frames (single, dip)")->capture_default_str();
    sdc->add_option("--videos", sd.stream.videos, "Videos (random)")->capture_default_str();
    sdc->add_option("--video-frames", sd.stream.frames, "Frames per video (random)")->capture_default_str();
    sdc->add_option("--objects", sd.stream.objects, "Objects per video (random)")->capture_default_str();
    sdc->add_option("--seed", sd.stream.seed, "Seed (random)")->capture_default_str();
    sdc->callback([&] { cmd_synth_detections(sd); });

    SynthCorpusArgs sc;
    auto* scc = s->add_subcommand("corpus", "Tracked detections shaped like a mined corpus.");
    scc->add_option("--shape", sc.shapes, "source:videos:detections:faces_per_frame (repeatable)");
    scc->add_option("--out", sc.out, "Output track JSONL file")->required();
    scc->add_option("--seed", sc.seed, "Seed")->capture_default_str();
    scc->callback([&] { cmd_synth_corpus(sc); });

    SynthEmbeddingsArgs se;
    auto* sec = s->add_subcommand("embeddings", "Labelled embedding store.");
    sec->add_option("--preset", se.preset, "bossou9, petface or clusters")->capture_default_str();
    sec->add_option("--out", se.out, "Output store (.cfe)")->required();
    sec->add_option("--dim", se.dim, "Embedding dimension")->capture_default_str();
    sec->add_option("--identities", se.identities, "Identities (clusters)")->capture_default_str();
    sec->add_option("--tracks", se.tracks, "Tracks per identity (clusters)")->capture_default_str();
    sec->add_option("--frames", se.frames, "Frames per track (clusters)")->capture_default_str();
    sec->add_option("--track-noise", se.noise.track, "Track offset scale")->capture_default_str();
    sec->add_option("--frame-noise", se.noise.frame, "Frame jitter scale")->capture_default_str();
    sec->add_option("--noise", se.portrait_noise, "Image noise scale (petface)")->capture_default_str();
    sec->add_option("--seed", se.seed, "Seed")->capture_default_str();
    sec->callback([&] { cmd_synth_embeddings(se); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const IoError& e) {
        std::cerr << "openreid: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "openreid: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "openreid: " << e.what() << "\n";
        return 1;
    }
}
