#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pseudovos/error.hpp"
#include "pseudovos/mask.hpp"
#include "pseudovos/netpbm.hpp"

namespace pseudovos {

enum class Split { train, val, test };

inline std::string to_string(Split s)
{
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

inline Split parse_split(const std::string& s)
{
    if (s == "train")
        return Split::train;
    if (s == "val")
        return Split::val;
    if (s == "test")
        return Split::test;
    fail(ErrorCategory::parse, "unknown split '" + s + "' (expected train, val or test)");
}

// Mask stored in a palette image; pixels equal to `label` belong to the object.
struct FileMaskRef {
    std::string path;
    int label = 1;

    friend bool operator==(const FileMaskRef&, const FileMaskRef&) = default;
};

using MaskRef = std::variant<RleMask, FileMaskRef>;

struct ObjectTrack {
    int id = 0;
    std::optional<std::string> category;
    std::map<int, BoundingBox> boxes;
    std::map<int, MaskRef> gt_masks;

    std::vector<int> presence() const
    {
        std::vector<int> out;
        out.reserve(boxes.size());
        for (const auto& [frame, box] : boxes)
            out.push_back(frame);
        return out;
    }
};

struct SequenceRecord {
    std::string id;
    int width = 0;
    int height = 0;
    double native_fps = 0.0;
    std::vector<std::string> frame_paths;
    std::vector<ObjectTrack> objects;

    int frame_count() const noexcept { return static_cast<int>(frame_paths.size()); }

    const ObjectTrack* find_object(int object_id) const
    {
        auto it = std::find_if(objects.begin(), objects.end(), [&](const auto& o) { return o.id == object_id; });
        return it == objects.end() ? nullptr : &*it;
    }
};

struct DatasetManifest {
    std::string name;
    Split split = Split::train;
    double fps_annotation = 1.0;
    std::vector<SequenceRecord> sequences;
    // Directory that relative frame and mask paths resolve against.
    std::filesystem::path root;

    const SequenceRecord* find_sequence(const std::string& id) const
    {
        auto it = std::find_if(sequences.begin(), sequences.end(), [&](const auto& s) { return s.id == id; });
        return it == sequences.end() ? nullptr : &*it;
    }

    const SequenceRecord& sequence(const std::string& id) const
    {
        const auto* s = find_sequence(id);
        require(s != nullptr, ErrorCategory::not_found, "unknown sequence '" + id + "'");
        return *s;
    }

    std::filesystem::path resolve(const std::string& relative) const
    {
        const std::filesystem::path p(relative);
        return p.is_absolute() ? p : root / p;
    }
};

// Checks every structural invariant; throws validation errors naming the offending field.
inline void validate(const DatasetManifest& m)
{
    require(m.fps_annotation > 0.0, ErrorCategory::validation, "fps_annotation must be positive");
    std::set<std::string> seq_ids;
    for (const auto& seq : m.sequences) {
        const std::string where = "sequence '" + seq.id + "'";
        require(!seq.id.empty(), ErrorCategory::validation, "sequence id must be non-empty");
        require(seq_ids.insert(seq.id).second, ErrorCategory::validation, "duplicate sequence id '" + seq.id + "'");
        require(!seq.frame_paths.empty(), ErrorCategory::validation, where + " has no frames");
        require(seq.native_fps > 0.0, ErrorCategory::validation, where + ": native_fps must be positive");
        require(seq.width >= 1 && seq.height >= 1, ErrorCategory::validation, where + ": width/height must be positive");
        std::set<int> obj_ids;
        for (const auto& obj : seq.objects) {
            const std::string owhere = where + " object " + std::to_string(obj.id);
            require(obj.id >= 1 && obj.id <= kMaxObjectId, ErrorCategory::validation,
                    owhere + ": id must be in 1.." + std::to_string(kMaxObjectId));
            require(obj_ids.insert(obj.id).second, ErrorCategory::validation,
                    where + ": duplicate object id " + std::to_string(obj.id));
            require(!obj.boxes.empty(), ErrorCategory::validation, owhere + ": no boxes (presence is empty)");
            for (const auto& [frame, box] : obj.boxes) {
                require(frame >= 0 && frame < seq.frame_count(), ErrorCategory::validation,
                        owhere + ": box frame " + std::to_string(frame) + " out of range");
                require(box.valid_in(seq.width, seq.height), ErrorCategory::validation,
                        owhere + ": box " + to_string(box) + " at frame " + std::to_string(frame) +
                            " outside the frame");
            }
            for (const auto& [frame, ref] : obj.gt_masks) {
                require(obj.boxes.count(frame) != 0, ErrorCategory::validation,
                        owhere + ": mask at frame " + std::to_string(frame) + " has no box");
                if (const auto* rle = std::get_if<RleMask>(&ref))
                    require(rle->width == seq.width && rle->height == seq.height, ErrorCategory::validation,
                            owhere + ": mask at frame " + std::to_string(frame) + " has wrong dimensions");
            }
        }
    }
}

// ---- JSON schema -----------------------------------------------------------

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* key, const std::string& where)
{
    require(j.is_object(), ErrorCategory::parse, where + ": expected an object");
    auto it = j.find(key);
    require(it != j.end(), ErrorCategory::parse, where + ": missing field '" + key + "'");
    return *it;
}

template <typename T>
T get_as(const nlohmann::json& j, const char* key, const std::string& where)
{
    const auto& v = field(j, key, where);
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCategory::parse, where + "." + key + ": " + e.what());
    }
}

inline MaskRef parse_mask_ref(const nlohmann::json& j, const std::string& where)
{
    if (j.contains("rle")) {
        try {
            return j.at("rle").get<RleMask>();
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCategory::parse, where + ".rle: " + e.what());
        } catch (const Error& e) {
            fail(ErrorCategory::parse, where + ".rle: " + e.what());
        }
    }
    if (j.contains("file"))
        return FileMaskRef{get_as<std::string>(j, "file", where), j.value("label", 1)};
    fail(ErrorCategory::parse, where + ": mask needs either 'rle' or 'file'");
}

inline int line_of_offset(const std::string& text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

} // namespace detail

inline DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path root = {})
{
    DatasetManifest m;
    m.root = std::move(root);
    m.name = detail::get_as<std::string>(j, "name", "manifest");
    m.split = parse_split(detail::get_as<std::string>(j, "split", "manifest"));
    m.fps_annotation = detail::get_as<double>(j, "fps_annotation", "manifest");
    const auto& seqs = detail::field(j, "sequences", "manifest");
    require(seqs.is_array(), ErrorCategory::parse, "manifest.sequences: expected an array");
    for (std::size_t si = 0; si < seqs.size(); ++si) {
        const std::string sw = "sequences[" + std::to_string(si) + "]";
        const auto& js = seqs[si];
        SequenceRecord s;
        s.id = detail::get_as<std::string>(js, "id", sw);
        s.width = detail::get_as<int>(js, "width", sw);
        s.height = detail::get_as<int>(js, "height", sw);
        s.native_fps = detail::get_as<double>(js, "native_fps", sw);
        s.frame_paths = detail::get_as<std::vector<std::string>>(js, "frames", sw);
        const auto& objs = js.contains("objects") ? js.at("objects") : nlohmann::json::array();
        require(objs.is_array(), ErrorCategory::parse, sw + ".objects: expected an array");
        for (std::size_t oi = 0; oi < objs.size(); ++oi) {
            const std::string ow = sw + ".objects[" + std::to_string(oi) + "]";
            const auto& jo = objs[oi];
            ObjectTrack o;
            o.id = detail::get_as<int>(jo, "id", ow);
            if (jo.contains("category") && !jo.at("category").is_null())
                o.category = detail::get_as<std::string>(jo, "category", ow);
            const auto& boxes = detail::field(jo, "boxes", ow);
            require(boxes.is_array(), ErrorCategory::parse, ow + ".boxes: expected an array");
            for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
                const std::string bw = ow + ".boxes[" + std::to_string(bi) + "]";
                const int frame = detail::get_as<int>(boxes[bi], "frame", bw);
                BoundingBox box;
                try {
                    box = detail::field(boxes[bi], "box", bw).get<BoundingBox>();
                } catch (const Error& e) {
                    fail(ErrorCategory::parse, bw + ".box: " + e.what());
                }
                require(o.boxes.emplace(frame, box).second, ErrorCategory::validation,
                        bw + ": duplicate box for frame " + std::to_string(frame));
            }
            if (jo.contains("masks")) {
                const auto& masks = jo.at("masks");
                require(masks.is_array(), ErrorCategory::parse, ow + ".masks: expected an array");
                for (std::size_t mi = 0; mi < masks.size(); ++mi) {
                    const std::string mw = ow + ".masks[" + std::to_string(mi) + "]";
                    const int frame = detail::get_as<int>(masks[mi], "frame", mw);
                    require(o.gt_masks.emplace(frame, detail::parse_mask_ref(masks[mi], mw)).second,
                            ErrorCategory::validation, mw + ": duplicate mask for frame " + std::to_string(frame));
                }
            }
            s.objects.push_back(std::move(o));
        }
        m.sequences.push_back(std::move(s));
    }
    validate(m);
    return m;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m)
{
    nlohmann::json seqs = nlohmann::json::array();
    for (const auto& s : m.sequences) {
        nlohmann::json objs = nlohmann::json::array();
        for (const auto& o : s.objects) {
            nlohmann::json boxes = nlohmann::json::array();
            for (const auto& [frame, box] : o.boxes)
                boxes.push_back({{"frame", frame}, {"box", box}});
            nlohmann::json masks = nlohmann::json::array();
            for (const auto& [frame, ref] : o.gt_masks) {
                if (const auto* rle = std::get_if<RleMask>(&ref))
                    masks.push_back({{"frame", frame}, {"rle", *rle}});
                else {
                    const auto& f = std::get<FileMaskRef>(ref);
                    masks.push_back({{"frame", frame}, {"file", f.path}, {"label", f.label}});
                }
            }
            nlohmann::json jo{{"id", o.id}, {"boxes", boxes}, {"masks", masks}};
            jo["category"] = o.category ? nlohmann::json(*o.category) : nlohmann::json(nullptr);
            objs.push_back(std::move(jo));
        }
        seqs.push_back({{"id", s.id},
                        {"width", s.width},
                        {"height", s.height},
                        {"native_fps", s.native_fps},
                        {"frames", s.frame_paths},
                        {"objects", objs}});
    }
    return {{"name", m.name}, {"split", to_string(m.split)}, {"fps_annotation", m.fps_annotation}, {"sequences", seqs}};
}

inline DatasetManifest load_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCategory::io, "cannot open manifest " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCategory::parse, path.string() + ":" + std::to_string(detail::line_of_offset(text, e.byte)) +
                                       ": " + e.what());
    }
    try {
        return manifest_from_json(j, path.parent_path());
    } catch (const Error& e) {
        throw Error(e.category(), path.string() + ": " + e.what());
    }
}

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorCategory::io, "cannot write manifest " + path.string());
    out << manifest_to_json(m).dump(1) << '\n';
}

inline BinaryMask resolve_mask(const DatasetManifest& m, const SequenceRecord& seq, const MaskRef& ref)
{
    if (const auto* rle = std::get_if<RleMask>(&ref))
        return rle_decode(*rle);
    const auto& f = std::get<FileMaskRef>(ref);
    BinaryMask mask = netpbm::read_mask(m.resolve(f.path), f.label);
    require(mask.width() == seq.width && mask.height() == seq.height, ErrorCategory::validation,
            f.path + ": mask dimensions do not match sequence '" + seq.id + "'");
    return mask;
}

// ---- statistics -------------------------------------------------------------

struct StatsRow {
    std::string name;
    long videos_train = 0;
    long videos_val = 0;
    long videos_test = 0;
    double avg_length_s = 0.0;
    double objects_per_video = 0.0;
    double annotation_fps = 0.0;
    long categories = 0;
};

inline StatsRow compute_stats(std::span<const DatasetManifest> manifests)
{
    require(!manifests.empty(), ErrorCategory::validation, "no manifests given");
    StatsRow row;
    row.name = manifests.front().name;
    row.annotation_fps = manifests.front().fps_annotation;
    std::set<std::string> categories;
    double length_sum = 0.0;
    long object_sum = 0;
    long videos = 0;
    for (const auto& m : manifests) {
        require(m.fps_annotation == row.annotation_fps, ErrorCategory::validation,
                "manifests disagree on annotation fps");
        const long n = static_cast<long>(m.sequences.size());
        (m.split == Split::train ? row.videos_train : m.split == Split::val ? row.videos_val : row.videos_test) += n;
        for (const auto& s : m.sequences) {
            length_sum += s.frame_count() / s.native_fps;
            object_sum += static_cast<long>(s.objects.size());
            for (const auto& o : s.objects)
                if (o.category)
                    categories.insert(*o.category);
        }
        videos += n;
    }
    if (videos > 0) {
        row.avg_length_s = length_sum / static_cast<double>(videos);
        row.objects_per_video = static_cast<double>(object_sum) / static_cast<double>(videos);
    }
    row.categories = static_cast<long>(categories.size());
    return row;
}

inline StatsRow compute_stats(const DatasetManifest& m) { return compute_stats(std::span<const DatasetManifest>(&m, 1)); }

inline std::string with_thousands(long v)
{
    std::string digits = std::to_string(v < 0 ? -v : v);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0)
            out.push_back(',');
        out.push_back(digits[i]);
    }
    return v < 0 ? "-" + out : out;
}

inline std::string fixed(double v, int decimals)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(decimals);
    os << v;
    return os.str();
}

inline std::string stats_header()
{
    return "Dataset | Videos train | Videos val | Avg len.(s) | Objects / video | Ann. fps | Categories";
}

// One row in the layout of the usual VOS dataset-statistics table. Zero categories render as "-".
inline std::string format_stats_row(const StatsRow& r)
{
    const double fps = r.annotation_fps;
    const std::string fps_text = fps == std::floor(fps) ? std::to_string(static_cast<long>(fps)) : fixed(fps, 1);
    return r.name + " | " + with_thousands(r.videos_train) + " | " + with_thousands(r.videos_val) + " | " +
           fixed(r.avg_length_s, 1) + " | " + fixed(r.objects_per_video, 1) + " | " + fps_text + " | " +
           (r.categories == 0 ? std::string("-") : with_thousands(r.categories));
}

inline nlohmann::json stats_to_json(const StatsRow& r)
{
    return {{"name", r.name},
            {"videos_train", r.videos_train},
            {"videos_val", r.videos_val},
            {"videos_test", r.videos_test},
            {"avg_length_s", r.avg_length_s},
            {"objects_per_video", r.objects_per_video},
            {"annotation_fps", r.annotation_fps},
            {"categories", r.categories}};
}

// ---- annotation effort ------------------------------------------------------

struct EffortReport {
    long masks_total = 0;
    long masks_manual = 0;
    double manual_fraction = 0.0;
    std::optional<double> reduction_factor; // absent when nothing was annotated manually
};

inline EffortReport effort_report(long masks_total, long masks_manual)
{
    require(masks_total > 0, ErrorCategory::validation, "masks_total must be positive");
    require(masks_manual >= 0, ErrorCategory::validation, "masks_manual must be non-negative");
    require(masks_manual <= masks_total, ErrorCategory::validation,
            "masks_manual (" + std::to_string(masks_manual) + ") exceeds masks_total (" +
                std::to_string(masks_total) + ")");
    EffortReport r{masks_total, masks_manual,
                   static_cast<double>(masks_manual) / static_cast<double>(masks_total), std::nullopt};
    if (masks_manual > 0)
        r.reduction_factor = static_cast<double>(masks_total) / static_cast<double>(masks_manual);
    return r;
}

inline std::string format_percent(double ratio, int decimals) { return fixed(100.0 * ratio, decimals) + "%"; }

// ---- frame selection ---------------------------------------------------------

enum class FrameStrategy { first, middle };

inline FrameStrategy parse_frame_strategy(const std::string& s)
{
    if (s == "first")
        return FrameStrategy::first;
    if (s == "middle")
        return FrameStrategy::middle;
    fail(ErrorCategory::usage, "unknown frame strategy '" + s + "' (expected first or middle)");
}

// Middle uses the lower median of the presence frames when their count is even.
inline int select_annotation_frame(const ObjectTrack& track, FrameStrategy strategy)
{
    const auto presence = track.presence(); // sorted: boxes is an ordered map
    require(!presence.empty(), ErrorCategory::validation,
            "object " + std::to_string(track.id) + " has empty presence");
    if (strategy == FrameStrategy::first)
        return presence.front();
    return presence[(presence.size() - 1) / 2];
}

} // namespace pseudovos
