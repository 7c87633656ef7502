#pragma once

#include <algorithm>
#include <compare>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pseudovos/dataset.hpp"
#include "pseudovos/error.hpp"
#include "pseudovos/image.hpp"
#include "pseudovos/mask.hpp"
#include "pseudovos/metrics.hpp"
#include "pseudovos/netpbm.hpp"
#include "pseudovos/toy_model.hpp"

namespace pseudovos {

struct ObjectFrameKey {
    std::string sequence;
    int object = 0;
    int frame = 0;

    auto operator<=>(const ObjectFrameKey&) const = default;
};

inline std::string to_string(const ObjectFrameKey& k)
{
    return k.sequence + "/" + std::to_string(k.object) + "@" + std::to_string(k.frame);
}

// ---- converters ---------------------------------------------------------------

enum class ConverterKind { box_fill, oval_prior, external, toy_model };

inline std::string to_string(ConverterKind k)
{
    switch (k) {
    case ConverterKind::box_fill: return "box_fill";
    case ConverterKind::oval_prior: return "oval_prior";
    case ConverterKind::external: return "external";
    case ConverterKind::toy_model: return "toy_model";
    }
    return "?";
}

inline ConverterKind parse_converter_kind(const std::string& s)
{
    if (s == "box_fill")
        return ConverterKind::box_fill;
    if (s == "oval_prior")
        return ConverterKind::oval_prior;
    if (s == "external")
        return ConverterKind::external;
    if (s == "toy_model")
        return ConverterKind::toy_model;
    fail(ErrorCategory::usage, "unknown converter '" + s + "' (expected box_fill, oval_prior, external or toy_model)");
}

struct FineTuneOptions {
    int steps = 300;
    double learning_rate = 1.0;
    LossConfig loss{LossKind::plain_ce, 3.0};
};

struct BoxToMaskConverter {
    ConverterKind kind = ConverterKind::box_fill;
    double margin_frac = 0.2;
    int crop_size = 64;
    // external: <external_dir>/<sequence>/<object>/<frame:05d>.pgm, non-zero pixels are foreground
    std::filesystem::path external_dir;
    ToyModel model;
    FineTuneOptions fine_tune;
    bool fine_tuned = false;

    bool trainable() const noexcept { return kind == ConverterKind::toy_model; }
    bool needs_pixels() const noexcept { return kind == ConverterKind::toy_model; }

    static BoxToMaskConverter toy(int channels)
    {
        BoxToMaskConverter c;
        c.kind = ConverterKind::toy_model;
        c.model = ToyModel::ellipse_prior(channels);
        return c;
    }
};

inline std::filesystem::path external_mask_path(const std::filesystem::path& dir, const ObjectFrameKey& key)
{
    char name[32];
    std::snprintf(name, sizeof name, "%05d.pgm", key.frame);
    return dir / key.sequence / std::to_string(key.object) / name;
}

struct Conversion {
    Grid<double> probability; // full frame, zero outside `region`
    BinaryMask mask;
    BoundingBox region;       // margin-expanded box
};

// Image channels (bilinear) stacked with the box channel (nearest), cropped to the expanded box.
inline Crop stacked_crop(const ImageTensor& image, const BoundingBox& box, double margin_frac, int crop_size)
{
    const Crop img = crop_with_margin(image, box, margin_frac, crop_size, Interp::bilinear);
    const BinaryMask box_mask = BinaryMask::from_box(image.width(), image.height(), box);
    const Crop bc = crop_with_margin(to_tensor(box_mask), box, margin_frac, crop_size, Interp::nearest);
    ImageTensor stacked(crop_size, crop_size, image.channels() + 1);
    for (int y = 0; y < crop_size; ++y)
        for (int x = 0; x < crop_size; ++x) {
            for (int c = 0; c < image.channels(); ++c)
                stacked.at(c, x, y) = img.tensor.at(c, x, y);
            stacked.at(image.channels(), x, y) = bc.tensor.at(0, x, y);
        }
    return {std::move(stacked), img.region};
}

inline TrainingSample training_sample(const BoxToMaskConverter& conv, const ImageTensor& image, const BoundingBox& box,
                                      const BinaryMask& target)
{
    require(target.width() == image.width() && target.height() == image.height(), ErrorCategory::validation,
            "manual mask does not match the frame size");
    const Crop crop = stacked_crop(image, box, conv.margin_frac, conv.crop_size);
    return {extract_features(crop.tensor), crop_labels_with_margin(target, box, conv.margin_frac, conv.crop_size)};
}

namespace detail {

inline Conversion finish(Grid<double> prob, const BoundingBox& region)
{
    BinaryMask mask(prob.width(), prob.height());
    for (int y = 0; y < prob.height(); ++y)
        for (int x = 0; x < prob.width(); ++x) {
            if (!region.contains(x, y))
                prob.at(x, y) = 0.0;
            mask.set(x, y, prob.at(x, y) >= 0.5);
        }
    return {std::move(prob), std::move(mask), region};
}

// Bilinear paste of a crop-space probability map back into the frame.
inline Grid<double> paste_back(const Grid<double>& crop, const BoundingBox& region, int width, int height)
{
    Grid<double> out(width, height, 0.0);
    const int s = crop.width();
    const ImageTensor t = [&] {
        ImageTensor tmp(s, s, 1);
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x)
                tmp.at(0, x, y) = static_cast<float>(crop.at(x, y));
        return tmp;
    }();
    const ImageTensor back = resample_region(t, {0, 0, s, s}, region.width(), region.height(), Interp::bilinear);
    for (int y = 0; y < region.height(); ++y)
        for (int x = 0; x < region.width(); ++x)
            out.at(region.x0 + x, region.y0 + y) = back.at(0, x, y);
    return out;
}

} // namespace detail

inline Conversion convert(const BoxToMaskConverter& conv, const ImageTensor& image, const BoundingBox& box,
                          const ObjectFrameKey& key = {})
{
    const int w = image.width();
    const int h = image.height();
    require_box_in(box, w, h);
    const BoundingBox region = expand_box(box, conv.margin_frac, w, h);
    Grid<double> prob(w, h, 0.0);
    switch (conv.kind) {
    case ConverterKind::box_fill:
        for (int y = box.y0; y < box.y1; ++y)
            for (int x = box.x0; x < box.x1; ++x)
                prob.at(x, y) = 1.0;
        break;
    case ConverterKind::oval_prior: {
        // Soft inscribed ellipse: p >= 0.5 exactly when ((x-cx)/a)^2 + ((y-cy)/b)^2 <= 1.
        const double cx = 0.5 * (box.x0 + box.x1);
        const double cy = 0.5 * (box.y0 + box.y1);
        const double a = 0.5 * box.width();
        const double b = 0.5 * box.height();
        for (int y = region.y0; y < region.y1; ++y)
            for (int x = region.x0; x < region.x1; ++x) {
                const double dx = (x + 0.5 - cx) / a;
                const double dy = (y + 0.5 - cy) / b;
                const double d2 = dx * dx + dy * dy;
                prob.at(x, y) = d2 <= 1.0 ? std::max(0.5, 1.0 / (1.0 + std::exp(4.0 * (d2 - 1.0))))
                                          : std::min(0.5 - 1e-9, 1.0 / (1.0 + std::exp(4.0 * (d2 - 1.0))));
            }
        break;
    }
    case ConverterKind::external: {
        const auto path = external_mask_path(conv.external_dir, key);
        require(std::filesystem::exists(path), ErrorCategory::not_found,
                "external converter: no mask for " + to_string(key) + " at " + path.string());
        const BinaryMask m = netpbm::read_mask(path);
        require(m.width() == w && m.height() == h, ErrorCategory::validation,
                "external converter: mask size mismatch at " + path.string());
        for (std::size_t i = 0; i < m.size(); ++i)
            prob[i] = m[i] ? 1.0 : 0.0;
        break;
    }
    case ConverterKind::toy_model: {
        require(conv.model.channels() == image.channels(), ErrorCategory::validation,
                "toy model expects " + std::to_string(conv.model.channels()) + " channel images, got " +
                    std::to_string(image.channels()));
        const Crop crop = stacked_crop(image, box, conv.margin_frac, conv.crop_size);
        const Grid<double> p = predict_foreground(conv.model, extract_features(crop.tensor));
        prob = detail::paste_back(p, crop.region, w, h);
        break;
    }
    }
    return detail::finish(std::move(prob), region);
}

// Specializes a copy of the converter on one manually annotated frame.
inline BoxToMaskConverter fine_tune_converter(const BoxToMaskConverter& conv, const ImageTensor& image,
                                              const BoundingBox& box, const BinaryMask& manual_mask, int steps)
{
    require(conv.trainable(), ErrorCategory::validation,
            "converter '" + to_string(conv.kind) + "' cannot be fine-tuned");
    require(steps >= 0, ErrorCategory::validation, "fine-tune steps must be non-negative");
    BoxToMaskConverter out = conv;
    if (steps == 0)
        return out;
    const TrainingSample sample = training_sample(conv, image, box, manual_mask);
    TrainOptions opt{steps, conv.fine_tune.learning_rate, true};
    out.model = train(conv.model, std::span<const TrainingSample>(&sample, 1), conv.fine_tune.loss, opt).model;
    out.fine_tuned = true;
    return out;
}

// ---- frame assembly -------------------------------------------------------------

struct ObjectCandidate {
    int id = 0;
    BoundingBox box;
    Grid<double> probability;
    BinaryMask mask;
};

// Highest probability wins a contested pixel; ties go to the smaller box, then the lower id.
inline LabelMap assemble_frame(const std::vector<ObjectCandidate>& objects, int width, int height)
{
    LabelMap out(width, height, kBackground);
    std::vector<const ObjectCandidate*> order;
    for (const auto& o : objects) {
        require(o.id >= 1 && o.id <= kMaxObjectId, ErrorCategory::validation, "object id out of range");
        require(o.mask.width() == width && o.mask.height() == height && o.probability.width() == width &&
                    o.probability.height() == height,
                ErrorCategory::validation, "object " + std::to_string(o.id) + ": mask does not match the frame");
        order.push_back(&o);
    }
    std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
        return a->box.area() != b->box.area() ? a->box.area() < b->box.area() : a->id < b->id;
    });
    for (std::size_t i = 0; i < out.size(); ++i) {
        const ObjectCandidate* best = nullptr;
        for (const auto* o : order)
            if (o->mask[i] && (best == nullptr || o->probability[i] > best->probability[i]))
                best = o;
        if (best != nullptr)
            out[i] = static_cast<std::uint8_t>(best->id);
    }
    return out;
}

// ---- label sets -------------------------------------------------------------------

struct Provenance {
    std::string converter;
    bool fine_tuned = false;
    bool manual = false;
    bool ignored = false;
    BoundingBox box;
    double confidence = 0.0; // mean foreground probability over the emitted mask

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct PseudoLabelSet {
    std::map<std::string, std::vector<LabelMap>> frames;
    std::map<ObjectFrameKey, Provenance> provenance;

    friend bool operator==(const PseudoLabelSet&, const PseudoLabelSet&) = default;

    const LabelMap& frame(const std::string& seq, int index) const
    {
        auto it = frames.find(seq);
        require(it != frames.end(), ErrorCategory::not_found, "unknown sequence '" + seq + "'");
        require(index >= 0 && index < static_cast<int>(it->second.size()), ErrorCategory::not_found,
                "sequence '" + seq + "' has no frame " + std::to_string(index));
        return it->second[static_cast<std::size_t>(index)];
    }

    BinaryMask object_mask(const ObjectFrameKey& key) const { return frame(key.sequence, key.frame).object_mask(key.object); }
};

inline Prediction to_prediction(const PseudoLabelSet& labels)
{
    Prediction p;
    for (const auto& [seq, frames] : labels.frames)
        for (std::size_t i = 0; i < frames.size(); ++i)
            p[seq].emplace(static_cast<int>(i), frames[i]);
    return p;
}

// ---- quality verdicts and filtering -------------------------------------------------

enum class VerdictSource { oracle_gt, human_review };

struct QualityVerdict {
    ObjectFrameKey key;
    std::optional<double> iou_vs_reference;
    VerdictSource source = VerdictSource::oracle_gt;
    bool bad = false; // human verdicts only; oracle verdicts are judged against the filter threshold
    std::optional<BinaryMask> replacement;
};

// IoU of every non-manual object-frame that has a reference mask in the manifest.
inline std::vector<QualityVerdict> oracle_verdicts(const PseudoLabelSet& labels, const DatasetManifest& manifest)
{
    std::vector<QualityVerdict> out;
    for (const auto& [key, prov] : labels.provenance) {
        if (prov.manual || prov.ignored)
            continue;
        const auto& seq = manifest.sequence(key.sequence);
        const auto* obj = seq.find_object(key.object);
        if (obj == nullptr)
            continue;
        auto ref = obj->gt_masks.find(key.frame);
        if (ref == obj->gt_masks.end())
            continue;
        const BinaryMask gt = resolve_mask(manifest, seq, ref->second);
        out.push_back({key, iou(labels.object_mask(key), gt), VerdictSource::oracle_gt, false, std::nullopt});
    }
    return out;
}

inline bool judged_bad(const QualityVerdict& v, double threshold)
{
    if (v.source == VerdictSource::oracle_gt) {
        require(v.iou_vs_reference.has_value(), ErrorCategory::validation,
                "oracle verdict without IoU for " + to_string(v.key));
        return *v.iou_vs_reference < threshold;
    }
    return v.bad || v.replacement.has_value();
}

// Bad object-frames lose their pixels; their box becomes an ignore region unless a
// replacement mask is supplied. Other objects' pixels inside the box survive.
inline PseudoLabelSet filter_labels(PseudoLabelSet labels, const std::vector<QualityVerdict>& verdicts,
                                    double threshold)
{
    std::map<ObjectFrameKey, const QualityVerdict*> bad;
    for (const auto& v : verdicts) {
        auto it = labels.provenance.find(v.key);
        require(it != labels.provenance.end(), ErrorCategory::not_found,
                "verdict for unknown object-frame " + to_string(v.key));
        if (!judged_bad(v, threshold))
            continue;
        if (it->second.manual && !v.replacement)
            continue; // manual masks are never ignored
        bad[v.key] = &v;
    }

    std::map<std::pair<std::string, int>, std::vector<const QualityVerdict*>> by_frame;
    for (const auto& [key, v] : bad)
        by_frame[{key.sequence, key.frame}].push_back(v);

    for (const auto& [where, list] : by_frame) {
        LabelMap& map = labels.frames.at(where.first).at(static_cast<std::size_t>(where.second));
        for (const auto* v : list)
            for (auto& px : map.data())
                if (px == v->key.object)
                    px = kBackground;
        for (const auto* v : list) {
            if (!v->replacement)
                continue;
            const BinaryMask& r = *v->replacement;
            require(r.width() == map.width() && r.height() == map.height(), ErrorCategory::validation,
                    "replacement mask size mismatch for " + to_string(v->key));
            for (std::size_t i = 0; i < r.size(); ++i)
                if (r[i])
                    map[i] = static_cast<std::uint8_t>(v->key.object);
        }
        for (const auto* v : list) {
            if (v->replacement)
                continue;
            const BoundingBox& box = labels.provenance.at(v->key).box;
            for (int y = box.y0; y < box.y1; ++y)
                for (int x = box.x0; x < box.x1; ++x)
                    if (map.at(x, y) == kBackground)
                        map.at(x, y) = kIgnore;
        }
        for (const auto* v : list) {
            Provenance& p = labels.provenance.at(v->key);
            if (v->replacement) {
                p.manual = true;
                p.ignored = false;
                p.confidence = 1.0;
            } else {
                p.ignored = true;
            }
        }
    }
    return labels;
}

// ---- generation -------------------------------------------------------------------

enum class GenerateStrategy { none, first_frame_ft, middle_frame_ft };

inline std::string to_string(GenerateStrategy s)
{
    switch (s) {
    case GenerateStrategy::none: return "none";
    case GenerateStrategy::first_frame_ft: return "first_frame_ft";
    case GenerateStrategy::middle_frame_ft: return "middle_frame_ft";
    }
    return "?";
}

inline GenerateStrategy parse_generate_strategy(const std::string& s)
{
    if (s == "none")
        return GenerateStrategy::none;
    if (s == "first_frame_ft" || s == "first")
        return GenerateStrategy::first_frame_ft;
    if (s == "middle_frame_ft" || s == "middle")
        return GenerateStrategy::middle_frame_ft;
    fail(ErrorCategory::usage, "unknown strategy '" + s + "' (expected none, first_frame_ft or middle_frame_ft)");
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn)
{
    const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

struct ObjectResult {
    std::map<int, ObjectCandidate> candidates; // by frame
    std::map<int, Provenance> provenance;
};

inline double mean_probability(const Conversion& c)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < c.mask.size(); ++i)
        if (c.mask[i]) {
            sum += c.probability[i];
            ++n;
        }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

} // namespace detail

using ImageLoader = std::function<ImageTensor(const DatasetManifest&, const SequenceRecord&, int)>;

inline ImageTensor load_frame_image(const DatasetManifest& m, const SequenceRecord& seq, int frame)
{
    ImageTensor img = netpbm::read_image(m.resolve(seq.frame_paths.at(static_cast<std::size_t>(frame))));
    require(img.width() == seq.width && img.height() == seq.height, ErrorCategory::validation,
            "frame " + std::to_string(frame) + " of '" + seq.id + "' does not match the declared size");
    return img;
}

// Per-object masks on every presence frame, assembled into one label map per frame.
// Fine-tuning strategies take the manual mask on the selected frame verbatim and
// specialize a fresh copy of the converter on it (when the converter is trainable).
inline PseudoLabelSet generate(const DatasetManifest& manifest, const BoxToMaskConverter& converter,
                               GenerateStrategy strategy, const ImageLoader& load_image = load_frame_image)
{
    PseudoLabelSet out;
    struct Job {
        const SequenceRecord* seq;
        const ObjectTrack* obj;
    };
    std::vector<Job> jobs;
    for (const auto& seq : manifest.sequences)
        for (const auto& obj : seq.objects)
            jobs.push_back({&seq, &obj});

    std::vector<detail::ObjectResult> results(jobs.size());
    detail::parallel_for(jobs.size(), [&](std::size_t j) {
        const auto& seq = *jobs[j].seq;
        const auto& obj = *jobs[j].obj;
        auto image_at = [&](int f) {
            return converter.needs_pixels() ? load_image(manifest, seq, f) : ImageTensor(seq.width, seq.height, 1);
        };
        BoxToMaskConverter conv = converter;
        std::optional<int> manual_frame;
        BinaryMask manual;
        if (strategy != GenerateStrategy::none) {
            const int f = select_annotation_frame(obj, strategy == GenerateStrategy::first_frame_ft
                                                           ? FrameStrategy::first
                                                           : FrameStrategy::middle);
            auto ref = obj.gt_masks.find(f);
            require(ref != obj.gt_masks.end(), ErrorCategory::validation,
                    "sequence '" + seq.id + "' object " + std::to_string(obj.id) + ": no manual mask on frame " +
                        std::to_string(f));
            manual = resolve_mask(manifest, seq, ref->second);
            manual_frame = f;
            if (conv.trainable())
                conv = fine_tune_converter(converter, image_at(f), obj.boxes.at(f), manual, converter.fine_tune.steps);
        }
        auto& res = results[j];
        for (const auto& [f, box] : obj.boxes) {
            Provenance prov{to_string(conv.kind), conv.fine_tuned, false, false, box, 0.0};
            if (manual_frame && f == *manual_frame) {
                Grid<double> prob(seq.width, seq.height, 0.0);
                for (std::size_t i = 0; i < manual.size(); ++i)
                    prob[i] = manual[i] ? 1.0 : 0.0;
                prov.manual = true;
                prov.confidence = 1.0;
                res.candidates.emplace(f, ObjectCandidate{obj.id, box, std::move(prob), manual});
            } else {
                Conversion c = convert(conv, image_at(f), box, {seq.id, obj.id, f});
                prov.confidence = detail::mean_probability(c);
                res.candidates.emplace(f, ObjectCandidate{obj.id, box, std::move(c.probability), std::move(c.mask)});
            }
            res.provenance.emplace(f, prov);
        }
    });

    std::size_t j = 0;
    for (const auto& seq : manifest.sequences) {
        std::vector<std::vector<ObjectCandidate>> per_frame(static_cast<std::size_t>(seq.frame_count()));
        for (std::size_t k = 0; k < seq.objects.size(); ++k, ++j) {
            for (auto& [f, cand] : results[j].candidates)
                per_frame[static_cast<std::size_t>(f)].push_back(std::move(cand));
            for (auto& [f, prov] : results[j].provenance)
                out.provenance.emplace(ObjectFrameKey{seq.id, seq.objects[k].id, f}, prov);
        }
        auto& frames = out.frames[seq.id];
        for (const auto& cands : per_frame)
            frames.push_back(assemble_frame(cands, seq.width, seq.height));
    }
    return out;
}

// ---- persistence ------------------------------------------------------------------

inline std::filesystem::path label_frame_path(const std::filesystem::path& dir, const std::string& seq, int frame)
{
    char name[32];
    std::snprintf(name, sizeof name, "%05d.pgm", frame);
    return dir / "labels" / seq / name;
}

inline nlohmann::json provenance_to_json(const PseudoLabelSet& labels)
{
    nlohmann::json seqs = nlohmann::json::object();
    for (const auto& [seq, frames] : labels.frames) {
        const auto& first = frames.front();
        seqs[seq] = {{"frames", frames.size()}, {"width", first.width()}, {"height", first.height()}};
    }
    nlohmann::json records = nlohmann::json::array();
    for (const auto& [key, p] : labels.provenance)
        records.push_back({{"sequence", key.sequence},
                           {"object", key.object},
                           {"frame", key.frame},
                           {"converter", p.converter},
                           {"fine_tuned", p.fine_tuned},
                           {"manual", p.manual},
                           {"ignored", p.ignored},
                           {"box", p.box},
                           {"confidence", p.confidence}});
    return {{"sequences", seqs}, {"records", records}};
}

inline void save_pseudolabels(const std::filesystem::path& dir, const PseudoLabelSet& labels)
{
    for (const auto& [seq, frames] : labels.frames)
        for (std::size_t i = 0; i < frames.size(); ++i)
            netpbm::write_label_map(label_frame_path(dir, seq, static_cast<int>(i)), frames[i]);
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "provenance.json");
    require(static_cast<bool>(out), ErrorCategory::io, "cannot write " + (dir / "provenance.json").string());
    out << provenance_to_json(labels).dump(1) << '\n';
}

inline PseudoLabelSet load_pseudolabels(const std::filesystem::path& dir)
{
    const auto path = dir / "provenance.json";
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCategory::io, "cannot open label store " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCategory::parse, path.string() + ": " + e.what());
    }
    PseudoLabelSet labels;
    try {
        for (const auto& [seq, info] : j.at("sequences").items()) {
            auto& frames = labels.frames[seq];
            const int n = info.at("frames").get<int>();
            for (int f = 0; f < n; ++f)
                frames.push_back(netpbm::read_label_map(label_frame_path(dir, seq, f)));
        }
        for (const auto& r : j.at("records")) {
            ObjectFrameKey key{r.at("sequence").get<std::string>(), r.at("object").get<int>(), r.at("frame").get<int>()};
            Provenance p{r.at("converter").get<std::string>(), r.at("fine_tuned").get<bool>(),
                         r.at("manual").get<bool>(),           r.at("ignored").get<bool>(),
                         r.at("box").get<BoundingBox>(),       r.at("confidence").get<double>()};
            labels.provenance.emplace(std::move(key), p);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCategory::parse, path.string() + ": " + e.what());
    }
    return labels;
}

// ---- verdict interchange -------------------------------------------------------------

inline nlohmann::json verdict_to_json(const QualityVerdict& v)
{
    nlohmann::json j{{"sequence", v.key.sequence},
                     {"object", v.key.object},
                     {"frame", v.key.frame},
                     {"source", v.source == VerdictSource::oracle_gt ? "oracle_gt" : "human_review"},
                     {"bad", v.bad}};
    j["iou"] = v.iou_vs_reference ? nlohmann::json(*v.iou_vs_reference) : nlohmann::json(nullptr);
    if (v.replacement)
        j["replacement"] = rle_encode(*v.replacement);
    return j;
}

inline QualityVerdict verdict_from_json(const nlohmann::json& j)
{
    try {
        QualityVerdict v;
        v.key = {j.at("sequence").get<std::string>(), j.at("object").get<int>(), j.at("frame").get<int>()};
        const auto source = j.at("source").get<std::string>();
        require(source == "oracle_gt" || source == "human_review", ErrorCategory::parse,
                "unknown verdict source '" + source + "'");
        v.source = source == "oracle_gt" ? VerdictSource::oracle_gt : VerdictSource::human_review;
        v.bad = j.value("bad", false);
        if (j.contains("iou") && !j.at("iou").is_null())
            v.iou_vs_reference = j.at("iou").get<double>();
        require(v.source != VerdictSource::oracle_gt || v.iou_vs_reference, ErrorCategory::parse,
                "oracle verdict for " + to_string(v.key) + " carries no IoU");
        if (j.contains("replacement"))
            v.replacement = rle_decode(j.at("replacement").get<RleMask>());
        return v;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCategory::parse, std::string("verdict: ") + e.what());
    }
}

inline nlohmann::json verdicts_to_json(const std::vector<QualityVerdict>& verdicts)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : verdicts)
        arr.push_back(verdict_to_json(v));
    return {{"verdicts", arr}};
}

inline std::vector<QualityVerdict> verdicts_from_json(const nlohmann::json& j)
{
    std::vector<QualityVerdict> out;
    const auto& arr = j.is_array() ? j : j.at("verdicts");
    for (const auto& v : arr)
        out.push_back(verdict_from_json(v));
    return out;
}

} // namespace pseudovos
