#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "pseudovos/dataset.hpp"
#include "pseudovos/error.hpp"
#include "pseudovos/mask.hpp"
#include "pseudovos/pseudolabel.hpp"

namespace pseudovos::review {

enum class Verdict { accept, reject, needs_mask };

inline std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::accept: return "accept";
    case Verdict::reject: return "reject";
    case Verdict::needs_mask: return "needs_mask";
    }
    return "?";
}

inline Verdict parse_verdict(const std::string& s)
{
    if (s == "accept")
        return Verdict::accept;
    if (s == "reject")
        return Verdict::reject;
    if (s == "needs_mask")
        return Verdict::needs_mask;
    fail(ErrorCategory::validation, "unknown verdict '" + s + "' (expected accept, reject or needs_mask)");
}

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

using Polygon = std::vector<Point>;

struct DecisionRecord {
    std::string timestamp;
    ObjectFrameKey key;
    Verdict verdict = Verdict::accept;
    std::optional<Polygon> polygon;

    friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

inline void validate_shape(const DecisionRecord& d)
{
    if (d.verdict == Verdict::needs_mask) {
        require(d.polygon.has_value(), ErrorCategory::validation, "needs_mask decision requires a polygon");
        require(d.polygon->size() >= 3, ErrorCategory::validation,
                "malformed polygon: " + std::to_string(d.polygon->size()) + " vertices, need at least 3");
    } else {
        require(!d.polygon.has_value(), ErrorCategory::validation, "polygon only allowed with needs_mask");
    }
}

inline std::string utc_timestamp()
{
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

inline nlohmann::json decision_to_json(const DecisionRecord& d)
{
    nlohmann::json j{{"timestamp", d.timestamp},
                     {"sequence", d.key.sequence},
                     {"object", d.key.object},
                     {"frame", d.key.frame},
                     {"verdict", to_string(d.verdict)}};
    if (d.polygon) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : *d.polygon)
            pts.push_back({p.x, p.y});
        j["polygon"] = pts;
    }
    return j;
}

inline DecisionRecord decision_from_json(const nlohmann::json& j)
{
    DecisionRecord d;
    try {
        d.timestamp = j.value("timestamp", std::string{});
        d.key = {j.at("sequence").get<std::string>(), j.at("object").get<int>(), j.at("frame").get<int>()};
        d.verdict = parse_verdict(j.at("verdict").get<std::string>());
        if (j.contains("polygon") && !j.at("polygon").is_null()) {
            Polygon poly;
            for (const auto& p : j.at("polygon")) {
                require(p.is_array() && p.size() == 2, ErrorCategory::validation, "polygon vertex must be [x, y]");
                poly.push_back({p[0].get<double>(), p[1].get<double>()});
            }
            d.polygon = std::move(poly);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCategory::parse, std::string("decision record: ") + e.what());
    }
    validate_shape(d);
    return d;
}

// Even-odd fill sampled at pixel centres. Vertices live in continuous pixel
// coordinates, so a frame of width w spans x in [0, w].
inline BinaryMask rasterize_polygon(const Polygon& poly, int width, int height)
{
    require(poly.size() >= 3, ErrorCategory::validation, "polygon needs at least 3 vertices");
    for (const auto& p : poly)
        require(p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height, ErrorCategory::validation,
                "polygon vertex (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") outside the " +
                    std::to_string(width) + "x" + std::to_string(height) + " frame");
    BinaryMask m(width, height);
    const std::size_t n = poly.size();
    for (int y = 0; y < height; ++y) {
        const double py = y + 0.5;
        for (int x = 0; x < width; ++x) {
            const double px = x + 0.5;
            bool inside = false;
            for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
                const Point& a = poly[i];
                const Point& b = poly[j];
                if ((a.y > py) != (b.y > py)) {
                    const double cross_x = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
                    if (px < cross_x)
                        inside = !inside;
                }
            }
            m.set(x, y, inside);
        }
    }
    return m;
}

struct ReviewState {
    std::map<ObjectFrameKey, DecisionRecord> latest;
    std::size_t records = 0;

    std::size_t reviewed() const { return latest.size(); }
    std::size_t count(Verdict v) const
    {
        std::size_t n = 0;
        for (const auto& [k, d] : latest)
            n += d.verdict == v ? 1 : 0;
        return n;
    }

    void apply(const DecisionRecord& d)
    {
        latest.insert_or_assign(d.key, d);
        ++records;
    }

    friend bool operator==(const ReviewState&, const ReviewState&) = default;
};

inline ReviewState replay(const std::vector<DecisionRecord>& log)
{
    ReviewState s;
    for (const auto& d : log)
        s.apply(d);
    return s;
}

inline nlohmann::json state_to_json(const ReviewState& s)
{
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [k, d] : s.latest)
        entries.push_back(decision_to_json(d));
    return {{"records", s.records},
            {"reviewed", s.reviewed()},
            {"accepted", s.count(Verdict::accept)},
            {"rejected", s.count(Verdict::reject)},
            {"annotated", s.count(Verdict::needs_mask)},
            {"latest", entries}};
}

// reject -> bad; needs_mask -> bad with the rasterized polygon as replacement; accept -> good.
inline std::vector<QualityVerdict> export_verdicts(const ReviewState& state, const DatasetManifest& manifest)
{
    std::vector<QualityVerdict> out;
    for (const auto& [key, d] : state.latest) {
        QualityVerdict v{key, std::nullopt, VerdictSource::human_review, d.verdict != Verdict::accept, std::nullopt};
        if (d.verdict == Verdict::needs_mask) {
            const auto& seq = manifest.sequence(key.sequence);
            v.replacement = rasterize_polygon(*d.polygon, seq.width, seq.height);
        }
        out.push_back(std::move(v));
    }
    return out;
}

// Newline-delimited JSON, one decision per line. Appends are serialized and
// synced to disk before append() returns.
class DecisionLog {
public:
    explicit DecisionLog(std::filesystem::path path)
        : path_(std::move(path))
    {
        if (path_.has_parent_path())
            std::filesystem::create_directories(path_.parent_path());
        file_ = std::fopen(path_.c_str(), "a");
        require(file_ != nullptr, ErrorCategory::io, "cannot open decision log " + path_.string());
    }

    DecisionLog(const DecisionLog&) = delete;
    DecisionLog& operator=(const DecisionLog&) = delete;

    ~DecisionLog()
    {
        if (file_ != nullptr) {
            std::fflush(file_);
            ::fsync(::fileno(file_));
            std::fclose(file_);
        }
    }

    void append(const DecisionRecord& d)
    {
        const std::string line = decision_to_json(d).dump() + "\n";
        std::lock_guard lock(mutex_);
        const bool ok = std::fwrite(line.data(), 1, line.size(), file_) == line.size() && std::fflush(file_) == 0 &&
                        ::fsync(::fileno(file_)) == 0;
        require(ok, ErrorCategory::io, "failed to append to decision log " + path_.string());
    }

    const std::filesystem::path& path() const noexcept { return path_; }

    static std::vector<DecisionRecord> read(const std::filesystem::path& path)
    {
        std::vector<DecisionRecord> out;
        if (!std::filesystem::exists(path))
            return out;
        std::ifstream in(path);
        require(static_cast<bool>(in), ErrorCategory::io, "cannot read decision log " + path.string());
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty())
                continue;
            try {
                out.push_back(decision_from_json(nlohmann::json::parse(line)));
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorCategory::parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            } catch (const Error& e) {
                throw Error(e.category(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        return out;
    }

private:
    std::filesystem::path path_;
    std::FILE* file_ = nullptr;
    std::mutex mutex_;
};

struct Response {
    int status = 200;
    nlohmann::json body;
};

inline Response error_response(const Error& e)
{
    int status = 400;
    if (e.category() == ErrorCategory::not_found)
        status = 404;
    else if (e.category() == ErrorCategory::io)
        status = 500;
    return {status, {{"error", std::string(category_name(e.category()))}, {"message", e.what()}}};
}

// Transport-independent request handling for the review endpoints.
class ReviewService {
public:
    ReviewService(DatasetManifest manifest, PseudoLabelSet labels, const std::filesystem::path& log_path)
        : manifest_(std::move(manifest)), labels_(std::move(labels)), log_(log_path)
    {
        for (const auto& d : DecisionLog::read(log_path))
            state_.apply(d);
    }

    Response list_sequences() const
    {
        nlohmann::json ids = nlohmann::json::array();
        for (const auto& s : manifest_.sequences)
            ids.push_back(s.id);
        return {200, {{"sequences", ids}}};
    }

    Response sequence_metadata(const std::string& id) const
    {
        return guarded([&] {
            const auto& seq = sequence_or_404(id);
            nlohmann::json objects = nlohmann::json::array();
            for (const auto& o : seq.objects) {
                nlohmann::json jo{{"id", o.id}, {"presence", o.presence()}};
                jo["category"] = o.category ? nlohmann::json(*o.category) : nlohmann::json(nullptr);
                objects.push_back(jo);
            }
            return Response{200,
                            {{"id", seq.id},
                             {"width", seq.width},
                             {"height", seq.height},
                             {"frames", seq.frame_count()},
                             {"native_fps", seq.native_fps},
                             {"objects", objects}}};
        });
    }

    // Path of the frame image on disk, for the transport to stream as-is.
    std::filesystem::path frame_image_path(const std::string& id, int frame) const
    {
        const auto& seq = sequence_or_404(id);
        require(frame >= 0 && frame < seq.frame_count(), ErrorCategory::not_found,
                "sequence '" + id + "' has no frame " + std::to_string(frame));
        return manifest_.resolve(seq.frame_paths[static_cast<std::size_t>(frame)]);
    }

    Response frame_masks(const std::string& id, int frame) const
    {
        return guarded([&] {
            sequence_or_404(id);
            const LabelMap& map = labels_.frame(id, frame);
            nlohmann::json masks = nlohmann::json::array();
            auto it = labels_.provenance.lower_bound({id, 0, 0});
            for (; it != labels_.provenance.end() && it->first.sequence == id; ++it) {
                if (it->first.frame != frame)
                    continue;
                const auto& p = it->second;
                masks.push_back({{"object", it->first.object},
                                 {"rle", rle_encode(map.object_mask(it->first.object))},
                                 {"provenance",
                                  {{"converter", p.converter},
                                   {"fine_tuned", p.fine_tuned},
                                   {"manual", p.manual},
                                   {"ignored", p.ignored},
                                   {"box", p.box},
                                   {"confidence", p.confidence}}}});
            }
            return Response{200, {{"sequence", id}, {"frame", frame}, {"masks", masks}}};
        });
    }

    Response post_decision(const nlohmann::json& body)
    {
        return guarded([&] {
            DecisionRecord d = decision_from_json(body);
            require(labels_.provenance.count(d.key) != 0, ErrorCategory::not_found,
                    "unknown object-frame " + to_string(d.key));
            if (d.polygon) {
                const auto& seq = manifest_.sequence(d.key.sequence);
                rasterize_polygon(*d.polygon, seq.width, seq.height); // validates vertex bounds
            }
            if (d.timestamp.empty())
                d.timestamp = utc_timestamp();
            std::unique_lock lock(state_mutex_);
            log_.append(d);
            state_.apply(d);
            return Response{200, {{"ack", true}, {"record", state_.records}}};
        });
    }

    Response state() const
    {
        std::shared_lock lock(state_mutex_);
        return {200, state_to_json(state_)};
    }

    Response verdicts() const
    {
        std::shared_lock lock(state_mutex_);
        return guarded([&] { return Response{200, verdicts_to_json(export_verdicts(state_, manifest_))}; });
    }

    // Unreviewed object-frames, lowest confidence first.
    Response queue() const
    {
        std::shared_lock lock(state_mutex_);
        std::vector<std::pair<const ObjectFrameKey*, const Provenance*>> items;
        for (const auto& [k, p] : labels_.provenance)
            if (!p.manual && state_.latest.count(k) == 0)
                items.emplace_back(&k, &p);
        std::stable_sort(items.begin(), items.end(),
                         [](const auto& a, const auto& b) { return a.second->confidence < b.second->confidence; });
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [k, p] : items)
            arr.push_back({{"sequence", k->sequence}, {"object", k->object}, {"frame", k->frame}, {"confidence", p->confidence}});
        return {200, {{"queue", arr}}};
    }

    ReviewState snapshot() const
    {
        std::shared_lock lock(state_mutex_);
        return state_;
    }

    const DatasetManifest& manifest() const noexcept { return manifest_; }
    const PseudoLabelSet& labels() const noexcept { return labels_; }

private:
    const SequenceRecord& sequence_or_404(const std::string& id) const
    {
        const auto* s = manifest_.find_sequence(id);
        require(s != nullptr, ErrorCategory::not_found, "unknown sequence '" + id + "'");
        return *s;
    }

    template <typename Fn>
    static Response guarded(Fn&& fn)
    {
        try {
            return fn();
        } catch (const Error& e) {
            return error_response(e);
        }
    }

    DatasetManifest manifest_;
    PseudoLabelSet labels_;
    DecisionLog log_;
    ReviewState state_;
    mutable std::shared_mutex state_mutex_;
};

} // namespace pseudovos::review
