#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "openreid/assignment.hpp"
#include "openreid/embedding_store.hpp"
#include "openreid/error.hpp"
#include "openreid/eval_protocols.hpp"
#include "openreid/knn_index.hpp"
#include "openreid/mining_filter.hpp"
#include "openreid/synth.hpp"
#include "openreid/track_engine.hpp"

namespace py = pybind11;
using namespace openreid;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<float> to_vector(const FloatArray& a) {
    if (a.ndim() != 1) throw ValidationError("expected a 1-d array");
    return {a.data(), a.data() + a.size()};
}

py::array_t<float> to_array(std::span<const float> v, std::size_t rows, std::size_t cols) {
    py::array_t<float> out({rows, cols});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict meta_to_dict(const RecordMeta& m) {
    py::dict d;
    d["image_id"] = m.image_id;
    d["track_id"] = m.track_id ? py::cast(*m.track_id) : py::none();
    d["identity"] = m.identity ? py::cast(*m.identity) : py::none();
    d["source"] = m.source;
    d["confidence"] = m.confidence;
    return d;
}

RecordMeta meta_from_dict(const py::dict& d) {
    RecordMeta m;
    m.image_id = d["image_id"].cast<std::string>();
    if (d.contains("track_id") && !d["track_id"].is_none()) m.track_id = d["track_id"].cast<std::string>();
    if (d.contains("identity") && !d["identity"].is_none()) m.identity = d["identity"].cast<std::string>();
    m.source = d.contains("source") ? d["source"].cast<std::string>() : "default";
    m.confidence = d.contains("confidence") ? d["confidence"].cast<double>() : 1.0;
    return m;
}

EmbeddingStore store_from_arrays(const FloatArray& vectors, const std::vector<py::dict>& metadata, bool normalize_rows) {
    if (vectors.ndim() != 2) throw ValidationError("vectors must be a 2-d array");
    const auto n = static_cast<std::size_t>(vectors.shape(0));
    const auto d = static_cast<std::size_t>(vectors.shape(1));
    if (metadata.size() != n) throw ValidationError("metadata length does not match the number of rows");
    if (n == 0) return EmbeddingStore::empty(d, normalize_rows);
    std::vector<EmbeddingRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        records.push_back({meta_from_dict(metadata[i]), {vectors.data() + i * d, vectors.data() + (i + 1) * d}});
    }
    return EmbeddingStore::from_records(std::move(records), normalize_rows);
}

BBox box_from(const std::array<double, 4>& b) { return {b[0], b[1], b[2], b[3]}; }

py::dict split_to_dict(const ReIDSplit& s) {
    py::dict d;
    d["gallery"] = s.gallery;
    d["queries"] = s.queries;
    d["seed"] = s.seed;
    return d;
}

ReIDSplit split_from(const std::vector<std::size_t>& gallery, const std::vector<std::size_t>& queries) {
    return {gallery, queries, 0};
}

py::dict mean_std_dict(const MeanStd& ms) {
    py::dict d;
    d["mean"] = ms.mean;
    d["std"] = ms.std;
    return d;
}

SplitParams split_params(std::size_t gallery_tracks, std::size_t query_tracks, std::size_t frames_per_track,
                         std::size_t min_portraits) {
    return {gallery_tracks, query_tracks, frames_per_track, min_portraits};
}

Detection detection_from_dict(const py::dict& d) {
    return {d["video_id"].cast<std::string>(),
            d["frame"].cast<std::int64_t>(),
            {d["x"].cast<double>(), d["y"].cast<double>(), d["w"].cast<double>(), d["h"].cast<double>()},
            d["score"].cast<double>()};
}

py::dict detection_to_dict(const Detection& det) {
    py::dict d;
    d["video_id"] = det.video_id;
    d["frame"] = det.frame;
    d["x"] = det.bbox.x;
    d["y"] = det.bbox.y;
    d["w"] = det.bbox.w;
    d["h"] = det.bbox.h;
    d["score"] = det.score;
    return d;
}

py::dict corpus_record_to_dict(const CorpusRecord& r) {
    py::dict d;
    d["image_id"] = r.image_id;
    d["video_id"] = r.video_id;
    d["frame"] = r.frame;
    d["track_id"] = r.track_id;
    d["source"] = r.source;
    d["confidence"] = r.confidence;
    return d;
}

CorpusRecord corpus_record_from_dict(const py::dict& d) {
    CorpusRecord r;
    r.image_id = d["image_id"].cast<std::string>();
    r.video_id = d.contains("video_id") ? d["video_id"].cast<std::string>() : r.image_id;
    r.frame = d.contains("frame") ? d["frame"].cast<std::int64_t>() : 0;
    r.track_id = d.contains("track_id") ? d["track_id"].cast<std::int64_t>() : 0;
    r.source = d.contains("source") ? d["source"].cast<std::string>() : source_of(r.video_id);
    r.confidence = d["confidence"].cast<double>();
    return r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "C++ core of openreid: embedding store, exact k-NN, tracking, filtering and evaluation.";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("normalize", [](const FloatArray& v) {
        const auto out = normalize(to_vector(v));
        return py::array_t<float>(out.size(), out.data());
    }, py::arg("vector"), "L2-normalized copy of a 1-d vector.");

    // --- embedding store ----------------------------------------------------

    py::class_<EmbeddingStore>(m, "EmbeddingStore")
        .def(py::init(&store_from_arrays), py::arg("vectors"), py::arg("metadata"), py::arg("normalize") = true,
             "Build from an (n, d) array and n metadata dicts (image_id, track_id, identity, source, confidence).")
        .def_property_readonly("dimension", &EmbeddingStore::dimension)
        .def_property_readonly("normalized", &EmbeddingStore::normalized)
        .def("__len__", &EmbeddingStore::size)
        .def_property_readonly("matrix", [](const EmbeddingStore& s) {
            return to_array(s.matrix(), s.size(), s.dimension());
        }, "Copy of the (n, d) float32 matrix.")
        .def_property_readonly("metadata", [](const EmbeddingStore& s) {
            py::list out;
            for (const auto& meta : s.metadata()) out.append(meta_to_dict(meta));
            return out;
        })
        .def("find", &EmbeddingStore::find, py::arg("image_id"))
        .def("cosine", &EmbeddingStore::cosine, py::arg("a"), py::arg("b"))
        .def("save", [](const EmbeddingStore& s, const std::filesystem::path& p) { save_store(s, p); }, py::arg("path"))
        .def_static("load", &load_store, py::arg("path"))
        .def("__eq__", [](const EmbeddingStore& a, const EmbeddingStore& b) { return a == b; });

    m.def("save_store", &save_store, py::arg("store"), py::arg("path"));
    m.def("load_store", &load_store, py::arg("path"));

    // --- k-NN -----------------------------------------------------------------

    py::class_<GalleryIndex>(m, "GalleryIndex")
        .def(py::init([](const FloatArray& matrix, std::vector<std::string> labels) {
            if (matrix.ndim() != 2) throw ValidationError("matrix must be a 2-d array");
            const auto d = static_cast<std::size_t>(matrix.shape(1));
            return GalleryIndex(d, {matrix.data(), matrix.data() + matrix.size()}, std::move(labels));
        }), py::arg("matrix"), py::arg("labels"), "Rows must be unit-norm.")
        .def_static("from_store", [](const EmbeddingStore& s, std::optional<std::vector<std::size_t>> rows) {
            return rows ? GalleryIndex::from_store(s, *rows) : GalleryIndex::from_store(s);
        }, py::arg("store"), py::arg("rows") = py::none())
        .def("__len__", &GalleryIndex::size)
        .def("search_topk", [](const GalleryIndex& g, const FloatArray& q, std::size_t k) {
            py::list out;
            for (const auto& n : g.search_topk(to_vector(q), k)) out.append(py::make_tuple(n.row, n.similarity, n.identity));
            return out;
        }, py::arg("query"), py::arg("k"), "[(row, similarity, identity)] in rank order.")
        .def("classify", [](const GalleryIndex& g, const FloatArray& q, std::size_t k) {
            const auto id = g.classify_weighted_vote(to_vector(q), k);
            return py::make_tuple(id.identity, id.score);
        }, py::arg("query"), py::arg("k"), "(identity, score) by similarity-weighted vote.");

    // --- tracking -------------------------------------------------------------

    m.def("iou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
        return iou(box_from(a), box_from(b));
    }, py::arg("a"), py::arg("b"), "IoU of two (x, y, w, h) boxes.");

    m.def("solve_assignment", [](const DoubleArray& cost) {
        if (cost.ndim() != 2) throw ValidationError("cost must be a 2-d array");
        CostMatrix c(static_cast<std::size_t>(cost.shape(0)), static_cast<std::size_t>(cost.shape(1)));
        for (std::size_t i = 0; i < c.rows(); ++i)
            for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) = cost.at(i, j);
        return solve_assignment(c);
    }, py::arg("cost"), "Minimum-cost assignment; entry i is the column of row i or None.");

    py::class_<TrackerConfig>(m, "TrackerConfig")
        .def(py::init<>())
        .def_readwrite("tau_high", &TrackerConfig::tau_high)
        .def_readwrite("tau_low", &TrackerConfig::tau_low)
        .def_readwrite("iou_high", &TrackerConfig::iou_high)
        .def_readwrite("iou_low", &TrackerConfig::iou_low)
        .def_readwrite("iou_tentative", &TrackerConfig::iou_tentative)
        .def_readwrite("min_hits", &TrackerConfig::min_hits)
        .def_readwrite("max_lost", &TrackerConfig::max_lost);

    m.def("run_tracker", [](const std::vector<py::dict>& detections, const TrackerConfig& config) {
        std::vector<Detection> stream;
        for (const auto& d : detections) stream.push_back(detection_from_dict(d));
        py::list out;
        for (const auto& t : run_tracker(stream, config)) {
            auto d = detection_to_dict(t.detection);
            d["track_id"] = t.track_id;
            out.append(d);
        }
        return out;
    }, py::arg("detections"), py::arg("config") = TrackerConfig{},
       "Detections are dicts with video_id, frame, x, y, w, h, score; output adds track_id.");

    // --- filtering --------------------------------------------------------------

    m.def("filter_corpus", [](const std::vector<py::dict>& records, double keep, double subsample, std::uint64_t seed) {
        std::vector<CorpusRecord> in;
        for (const auto& r : records) in.push_back(corpus_record_from_dict(r));
        py::list out;
        for (const auto& r : filter_corpus(in, keep, subsample, seed)) out.append(corpus_record_to_dict(r));
        return out;
    }, py::arg("records"), py::arg("keep_fraction"), py::arg("subsample_fraction"), py::arg("seed") = 0);

    // --- evaluation ---------------------------------------------------------------

    m.def("build_reid_split", [](const EmbeddingStore& s, const std::string& mode, std::size_t gallery_tracks,
                                 std::size_t query_tracks, std::size_t frames_per_track, std::size_t min_portraits,
                                 std::uint64_t seed) {
        return split_to_dict(build_reid_split(s.metadata(), parse_split_mode(mode),
                                              split_params(gallery_tracks, query_tracks, frames_per_track, min_portraits),
                                              seed));
    }, py::arg("store"), py::arg("mode") = "track", py::arg("gallery_tracks") = 35, py::arg("query_tracks") = 7,
       py::arg("frames_per_track") = 10, py::arg("min_portraits") = 4, py::arg("seed") = 0);

    m.def("eval_reid", [](const EmbeddingStore& s, const std::vector<std::size_t>& gallery,
                          const std::vector<std::size_t>& queries, const std::vector<std::size_t>& k_values) {
        return eval_reid(split_from(gallery, queries), s, k_values);
    }, py::arg("store"), py::arg("gallery"), py::arg("queries"), py::arg("k_values"),
       "Class-averaged accuracy for each k.");

    m.def("run_reid_protocol", [](const EmbeddingStore& s, const std::string& mode, std::vector<std::size_t> k_values,
                                  std::size_t repetitions, std::uint64_t seed, std::size_t gallery_tracks,
                                  std::size_t query_tracks, std::size_t frames_per_track, std::size_t min_portraits) {
        const auto r = run_reid_protocol(s, parse_split_mode(mode),
                                         split_params(gallery_tracks, query_tracks, frames_per_track, min_portraits),
                                         k_values, seed, repetitions);
        py::dict d;
        d["mode"] = to_string(r.mode);
        d["k_values"] = r.k_values;
        d["identities"] = r.identities;
        d["gallery_size"] = r.gallery_size;
        d["query_size"] = r.query_size;
        d["selection_accuracy"] = r.selection_accuracy;
        py::list per_k;
        for (const auto& ms : r.per_k) per_k.append(mean_std_dict(ms));
        d["per_k"] = per_k;
        d["chosen_k"] = r.chosen_k;
        d["accuracy"] = mean_std_dict(r.accuracy);
        return d;
    }, py::arg("store"), py::arg("mode") = "track",
       py::arg("k_values") = std::vector<std::size_t>{1, 3, 5, 7, 10, 20, 50}, py::arg("repetitions") = 10,
       py::arg("seed") = 0, py::arg("gallery_tracks") = 35, py::arg("query_tracks") = 7,
       py::arg("frames_per_track") = 10, py::arg("min_portraits") = 4);

    m.def("roc_auc", [](const std::vector<double>& pos, const std::vector<double>& neg) { return roc_auc(pos, neg); },
          py::arg("positive_scores"), py::arg("negative_scores"));

    m.def("evaluate_verification", [](const EmbeddingStore& s, const std::string& mode,
                                      std::optional<std::size_t> min_tracks, std::size_t negative_sets,
                                      std::uint64_t seed) {
        const auto pairs = build_verification_pairs(s.metadata(), parse_split_mode(mode), min_tracks, seed);
        const auto r = eval_verification(pairs, s, negative_sets);
        py::dict d;
        d["images"] = r.images;
        d["positives"] = r.positives;
        d["negatives_per_set"] = r.negatives_per_set;
        d["auc_per_set"] = r.auc_per_set;
        d["auc"] = mean_std_dict(r.auc);
        py::list plist;
        for (const auto& p : pairs.pairs) plist.append(py::make_tuple(p.a, p.b, p.same));
        d["pairs"] = plist;
        return d;
    }, py::arg("store"), py::arg("mode") = "track", py::arg("min_tracks") = py::none(),
       py::arg("negative_sets") = 10, py::arg("seed") = 0,
       "Builds the balanced pair set and reports ROC-AUC over the negative sets.");

    // --- fixtures -----------------------------------------------------------------

    auto s = m.def_submodule("synth", "Deterministic synthetic fixtures.");
    s.def("bossou9_like", [](std::size_t dim, std::uint64_t seed, double track_noise, double frame_noise) {
        return synth::bossou9_like(dim, seed, {track_noise, frame_noise});
    }, py::arg("dimension") = 64, py::arg("seed") = 0, py::arg("track_noise") = synth::ClusterNoise{}.track,
       py::arg("frame_noise") = synth::ClusterNoise{}.frame);
    s.def("petface_like", &synth::petface_like, py::arg("dimension") = 64, py::arg("seed") = 0,
          py::arg("noise") = 1.7);
    s.def("confidence_dip", [](std::size_t frames, std::size_t start, std::size_t length, double score, double dip) {
        py::list out;
        for (const auto& d : synth::confidence_dip(frames, start, length, score, dip)) out.append(detection_to_dict(d));
        return out;
    }, py::arg("frames") = 10, py::arg("dip_start") = 4, py::arg("dip_length") = 2, py::arg("score") = 0.9,
       py::arg("dip_score") = 0.3);

}
