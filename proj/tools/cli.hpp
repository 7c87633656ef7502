#pragma once

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pseudovos/pseudovos.hpp"
#include "pseudovos/review_server.hpp"

namespace pseudovos::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kIo = 3,
    kParse = 4,
    kValidation = 5,
    kNotFound = 6,
    kNumeric = 7,
    kCheckFailed = 8,
};

inline int exit_code(ErrorCategory c)
{
    switch (c) {
    case ErrorCategory::usage: return kUsage;
    case ErrorCategory::io: return kIo;
    case ErrorCategory::parse: return kParse;
    case ErrorCategory::validation: return kValidation;
    case ErrorCategory::not_found: return kNotFound;
    case ErrorCategory::numeric: return kNumeric;
    }
    return kFailure;
}

namespace detail {

inline json read_json_file(const fs::path& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCategory::io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorCategory::parse, path.string() + ": " + e.what());
    }
}

inline void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorCategory::io, "cannot write " + path.string());
    out << text;
}

inline void require_file(const fs::path& p, const std::string& what)
{
    require(fs::exists(p), ErrorCategory::io, what + " not found: " + p.string());
}

inline bool has_flag(const std::vector<std::string>& args, const std::string& flag)
{
    for (const auto& a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0)
            return true;
    return false;
}

// Expands `--config file.json` into flags. Keys under "common" and under the
// subcommand name become `--key value` unless the flag is given explicitly.
inline std::vector<std::string> expand_config(std::vector<std::string> args)
{
    auto it = std::find(args.begin(), args.end(), "--config");
    if (it == args.end())
        return args;
    require(std::next(it) != args.end(), ErrorCategory::usage, "--config needs a file argument");
    const fs::path path = *std::next(it);
    args.erase(it, std::next(it, 2));
    const json cfg = read_json_file(path);
    require(cfg.is_object(), ErrorCategory::parse, path.string() + ": config must be a JSON object");
    std::string sub;
    for (const auto& a : args)
        if (!a.empty() && a[0] != '-') {
            sub = a;
            break;
        }
    std::vector<std::string> extra;
    auto add_section = [&](const json& section) {
        for (const auto& [key, value] : section.items()) {
            const std::string flag = "--" + key;
            if (has_flag(args, flag) || has_flag(extra, flag))
                continue;
            if (value.is_boolean()) {
                if (value.get<bool>())
                    extra.push_back(flag);
            } else if (value.is_array()) {
                extra.push_back(flag);
                for (const auto& v : value)
                    extra.push_back(v.is_string() ? v.get<std::string>() : v.dump());
            } else if (value.is_object()) {
                extra.push_back(flag);
                extra.push_back(value.dump());
            } else {
                extra.push_back(flag);
                extra.push_back(value.is_string() ? value.get<std::string>() : value.dump());
            }
        }
    };
    if (!sub.empty() && cfg.contains(sub))
        add_section(cfg.at(sub));
    if (cfg.contains("common"))
        add_section(cfg.at("common"));
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

inline std::vector<DatasetManifest> load_manifests(const std::vector<std::string>& paths)
{
    std::vector<DatasetManifest> out;
    for (const auto& p : paths)
        out.push_back(load_manifest(p));
    return out;
}

} // namespace detail

struct Options {
    bool dry_run = false;
    bool json_output = false;

    // stats / select-frames / pseudolabel / filter / eval / serve
    std::vector<std::string> manifests;
    std::string labels_dir;
    std::string out;

    // effort
    long total = 0;
    long manual = 0;

    // select-frames
    std::string frame_strategy = "middle";

    // pseudolabel
    std::string converter = "toy_model";
    std::string strategy = "middle_frame_ft";
    std::string external_dir;
    std::string model_path;
    double margin = 0.2;
    int crop_size = 64;
    int ft_steps = 300;
    double ft_lr = 1.0;

    // filter
    double threshold = 0.5;
    std::string verdicts_path;
    bool oracle = false;

    // eval
    std::string mode = "present_only";
    double tolerance_frac = 0.008;
    std::vector<double> recall_thresholds{0.5, 0.7};

    // train-toy
    std::string loss = "partially_huberised_ce";
    double tau = 3.0;
    int steps = 300;
    double lr = 1.0;
    int object = 0;

    // gradcheck
    std::uint64_t seed = 7;
    int instances = 100;
    int size = 8;
    double fd_step = 1e-5;

    // noise-exp
    std::string noise_kind = "pixel_flip";
    double eta = 0.3;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string corpus_json;

    // serve
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string log_path;

    // synth
    int sequences = 4;
    int frames = 12;
};

class Runner {
public:
    Runner(std::ostream& out, std::ostream& err)
        : out_(out), err_(err)
    {
    }

    int run(std::vector<std::string> args)
    {
        try {
            args = detail::expand_config(std::move(args));
        } catch (const Error& e) {
            err_ << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
            return exit_code(e.category());
        }

        CLI::App app{"Box-to-mask pseudo-labels for video object segmentation datasets", "pseudovos"};
        app.require_subcommand(1);
        app.fallthrough(); // global flags may follow the subcommand
        app.option_defaults()->always_capture_default();
        app.add_flag("--dry-run", opt_.dry_run, "Validate inputs without writing anything");
        app.add_flag("--json", opt_.json_output, "Emit machine-readable JSON on stdout");
        app.set_help_all_flag("--help-all");
        register_commands(app);

        std::vector<std::string> reversed(args.rbegin(), args.rend());
        try {
            app.parse(reversed);
        } catch (const CLI::CallForHelp& e) {
            out_ << app.help();
            return kOk;
        } catch (const CLI::CallForAllHelp& e) {
            out_ << app.help("", CLI::AppFormatMode::All);
            return kOk;
        } catch (const CLI::ParseError& e) {
            err_ << "error[usage]: " << e.what() << '\n';
            return kUsage;
        }

        try {
            return dispatch_(app);
        } catch (const Error& e) {
            err_ << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
            return exit_code(e.category());
        } catch (const std::exception& e) {
            err_ << "error[internal]: " << e.what() << '\n';
            return kFailure;
        }
    }

private:
    void register_commands(CLI::App& app)
    {
        auto* stats = app.add_subcommand("stats", "Dataset statistics row (videos, length, objects, fps, categories)");
        stats->add_option("--manifest", opt_.manifests, "Manifest file(s), one per split")->default_str("")->required();
        stats->add_option("--name", opt_.out, "Dataset name shown in the row");

        auto* effort = app.add_subcommand("effort", "Annotation-effort accounting");
        effort->add_option("--total", opt_.total, "Total number of masks")->required();
        effort->add_option("--manual", opt_.manual, "Number of manually annotated masks")->required();

        auto* select = app.add_subcommand("select-frames", "Frame chosen for manual annotation, per object");
        select->add_option("--manifest", opt_.manifests, "Manifest file")->default_str("")->required()->expected(1);
        select->add_option("--strategy", opt_.frame_strategy, "first or middle")->check(CLI::IsMember({"first", "middle"}));

        auto* pl = app.add_subcommand("pseudolabel", "Convert boxes into pseudo-label maps");
        pl->add_option("--manifest", opt_.manifests, "Manifest file")->default_str("")->required()->expected(1);
        pl->add_option("--converter", opt_.converter, "box_fill, oval_prior, external or toy_model");
        pl->add_option("--strategy", opt_.strategy, "none, first_frame_ft or middle_frame_ft");
        pl->add_option("--external-dir", opt_.external_dir, "Mask directory for the external converter");
        pl->add_option("--model", opt_.model_path, "Base toy model (JSON); defaults to the ellipse prior");
        pl->add_option("--margin", opt_.margin, "Crop margin as a fraction of the box size");
        pl->add_option("--crop-size", opt_.crop_size, "Toy model crop resolution");
        pl->add_option("--ft-steps", opt_.ft_steps, "Fine-tuning steps per object");
        pl->add_option("--ft-lr", opt_.ft_lr, "Fine-tuning learning rate");
        pl->add_option("--out", opt_.out, "Output label store directory")->required();

        auto* filter = app.add_subcommand("filter", "Replace bad pseudo-labels with ignore boxes");
        filter->add_option("--labels", opt_.labels_dir, "Input label store")->required();
        filter->add_option("--out", opt_.out, "Output label store")->required();
        filter->add_option("--threshold", opt_.threshold, "IoU threshold for oracle verdicts");
        filter->add_option("--verdicts", opt_.verdicts_path, "Verdict file (JSON) from review export");
        filter->add_flag("--oracle", opt_.oracle, "Judge against ground-truth masks in the manifest");
        filter->add_option("--manifest", opt_.manifests, "Manifest with reference masks (for --oracle)")->default_str("")->expected(1);

        auto* eval = app.add_subcommand("eval", "J, F, J&F and recall of a label store against ground truth");
        eval->add_option("--manifest", opt_.manifests, "Manifest with ground-truth masks")->default_str("")->required()->expected(1);
        eval->add_option("--labels", opt_.labels_dir, "Label store to evaluate")->required();
        eval->add_option("--mode", opt_.mode, "conventional or present_only")
            ->check(CLI::IsMember({"conventional", "present_only"}));
        eval->add_option("--tolerance-frac", opt_.tolerance_frac, "Boundary tolerance as a fraction of the diagonal");
        eval->add_option("--recall-thresholds", opt_.recall_thresholds, "IoU thresholds for recall");
        eval->add_option("--out", opt_.out, "Write the report JSON here as well");

        auto* train = app.add_subcommand("train-toy", "Train the per-pixel toy model on a label store or ground truth");
        train->add_option("--manifest", opt_.manifests, "Manifest (frames, boxes, ground truth)")->default_str("")->required()->expected(1);
        train->add_option("--labels", opt_.labels_dir, "Train on this label store instead of ground truth");
        train->add_option("--loss", opt_.loss, "plain_ce or partially_huberised_ce");
        train->add_option("--tau", opt_.tau, "Branch parameter of the robust loss");
        train->add_option("--steps", opt_.steps, "Gradient descent steps");
        train->add_option("--lr", opt_.lr, "Learning rate");
        train->add_option("--margin", opt_.margin, "Crop margin");
        train->add_option("--crop-size", opt_.crop_size, "Crop resolution");
        train->add_option("--out", opt_.out, "Output directory (model.json, loss_trace.json)")->required();

        auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the analytic loss gradient");
        grad->add_option("--seed", opt_.seed, "Random seed");
        grad->add_option("--instances", opt_.instances, "Random instances per loss kind");
        grad->add_option("--size", opt_.size, "Grid size of each instance");
        grad->add_option("--step", opt_.fd_step, "Central difference step");

        auto* noise = app.add_subcommand("noise-exp", "Plain vs partially Huberised CE under label noise");
        noise->add_option("--kind", opt_.noise_kind, "pixel_flip or mask_corrupt");
        noise->add_option("--eta", opt_.eta, "Noise rate");
        noise->add_option("--seeds", opt_.seeds, "Seeds, one arm pair each");
        noise->add_option("--tau", opt_.tau, "Branch parameter of the robust loss");
        noise->add_option("--steps", opt_.steps, "Training steps");
        noise->add_option("--lr", opt_.lr, "Learning rate");
        noise->add_option("--corpus", opt_.corpus_json, "Corpus spec as a JSON object");
        noise->add_option("--out", opt_.out, "Write the report JSON here as well");

        auto* serve = app.add_subcommand("serve", "HTTP review service");
        serve->add_option("--manifest", opt_.manifests, "Manifest file")->default_str("")->required()->expected(1);
        serve->add_option("--labels", opt_.labels_dir, "Label store")->required();
        serve->add_option("--log", opt_.log_path, "Decision log (defaults to <labels>/decisions.ndjson)");
        serve->add_option("--host", opt_.host, "Bind address");
        serve->add_option("--port", opt_.port, "Port (0 picks a free one)");

        auto* synth = app.add_subcommand("synth", "Write a synthetic drifting-object corpus");
        synth->add_option("--sequences", opt_.sequences, "Number of sequences");
        synth->add_option("--frames", opt_.frames, "Frames per sequence");
        synth->add_option("--seed", opt_.seed, "Random seed");
        synth->add_option("--out", opt_.out, "Output directory")->required();

        dispatch_ = [=, this](CLI::App&) -> int {
            if (*stats) return cmd_stats();
            if (*effort) return cmd_effort();
            if (*select) return cmd_select_frames();
            if (*pl) return cmd_pseudolabel();
            if (*filter) return cmd_filter();
            if (*eval) return cmd_eval();
            if (*train) return cmd_train();
            if (*grad) return cmd_gradcheck();
            if (*noise) return cmd_noise();
            if (*serve) return cmd_serve();
            if (*synth) return cmd_synth();
            return kUsage;
        };
    }

    void emit(const json& j) { out_ << j.dump(2) << '\n'; }

    int dry_run_ok()
    {
        out_ << "dry-run: inputs valid\n";
        return kOk;
    }

    int cmd_stats()
    {
        auto manifests = detail::load_manifests(opt_.manifests);
        if (opt_.dry_run)
            return dry_run_ok();
        StatsRow row = compute_stats(manifests);
        if (!opt_.out.empty())
            row.name = opt_.out;
        if (opt_.json_output) {
            emit(stats_to_json(row));
        } else {
            out_ << stats_header() << '\n' << format_stats_row(row) << '\n';
        }
        return kOk;
    }

    int cmd_effort()
    {
        const EffortReport r = effort_report(opt_.total, opt_.manual);
        if (opt_.dry_run)
            return dry_run_ok();
        if (opt_.json_output) {
            json j{{"masks_total", r.masks_total}, {"masks_manual", r.masks_manual}, {"manual_fraction", r.manual_fraction}};
            j["reduction_factor"] = r.reduction_factor ? json(*r.reduction_factor) : json(nullptr);
            emit(j);
            return kOk;
        }
        out_ << "masks_total: " << r.masks_total << '\n'
             << "masks_manual: " << r.masks_manual << '\n'
             << "manual_fraction: " << format_percent(r.manual_fraction, 2) << " (" << format_percent(r.manual_fraction, 1)
             << ")\n"
             << "reduction_factor: " << (r.reduction_factor ? fixed(*r.reduction_factor, 1) + "\u00d7" : std::string("n/a"))
             << '\n';
        return kOk;
    }

    int cmd_select_frames()
    {
        const auto m = load_manifest(opt_.manifests.front());
        const auto strategy = parse_frame_strategy(opt_.frame_strategy);
        if (opt_.dry_run)
            return dry_run_ok();
        json rows = json::array();
        for (const auto& s : m.sequences)
            for (const auto& o : s.objects)
                rows.push_back({{"sequence", s.id}, {"object", o.id}, {"frame", select_annotation_frame(o, strategy)}});
        if (opt_.json_output) {
            emit({{"strategy", opt_.frame_strategy}, {"selections", rows}});
        } else {
            for (const auto& r : rows)
                out_ << r["sequence"].get<std::string>() << '\t' << r["object"] << '\t' << r["frame"] << '\n';
        }
        return kOk;
    }

    BoxToMaskConverter make_converter(const DatasetManifest& m)
    {
        BoxToMaskConverter conv;
        conv.kind = parse_converter_kind(opt_.converter);
        conv.margin_frac = opt_.margin;
        conv.crop_size = opt_.crop_size;
        conv.fine_tune.steps = opt_.ft_steps;
        conv.fine_tune.learning_rate = opt_.ft_lr;
        require(opt_.crop_size >= 1, ErrorCategory::usage, "--crop-size must be positive");
        if (conv.kind == ConverterKind::external) {
            require(!opt_.external_dir.empty(), ErrorCategory::usage, "--external-dir is required for the external converter");
            detail::require_file(opt_.external_dir, "external mask directory");
            conv.external_dir = opt_.external_dir;
        }
        if (conv.kind == ConverterKind::toy_model) {
            if (!opt_.model_path.empty()) {
                try {
                    conv.model = detail::read_json_file(opt_.model_path).get<ToyModel>();
                } catch (const json::exception& e) {
                    fail(ErrorCategory::parse, opt_.model_path + ": " + e.what());
                }
            } else {
                int channels = 3;
                if (!m.sequences.empty())
                    channels = load_frame_image(m, m.sequences.front(), 0).channels();
                conv.model = ToyModel::ellipse_prior(channels);
            }
        }
        return conv;
    }

    int cmd_pseudolabel()
    {
        const auto m = load_manifest(opt_.manifests.front());
        const auto strategy = parse_generate_strategy(opt_.strategy);
        for (const auto& s : m.sequences)
            for (const auto& p : s.frame_paths)
                detail::require_file(m.resolve(p), "frame image");
        const auto conv = make_converter(m);
        if (opt_.dry_run)
            return dry_run_ok();
        const PseudoLabelSet labels = generate(m, conv, strategy);
        save_pseudolabels(opt_.out, labels);
        std::size_t manual = 0;
        for (const auto& [k, p] : labels.provenance)
            manual += p.manual ? 1 : 0;
        emit({{"sequences", labels.frames.size()},
              {"object_frames", labels.provenance.size()},
              {"manual", manual},
              {"converter", opt_.converter},
              {"strategy", to_string(strategy)},
              {"out", opt_.out}});
        return kOk;
    }

    int cmd_filter()
    {
        require(opt_.oracle != !opt_.verdicts_path.empty(), ErrorCategory::usage,
                "filter needs exactly one of --oracle or --verdicts");
        const PseudoLabelSet labels = load_pseudolabels(opt_.labels_dir);
        std::vector<QualityVerdict> verdicts;
        if (opt_.oracle) {
            require(!opt_.manifests.empty(), ErrorCategory::usage, "--oracle needs --manifest");
            verdicts = oracle_verdicts(labels, load_manifest(opt_.manifests.front()));
        } else {
            verdicts = verdicts_from_json(detail::read_json_file(opt_.verdicts_path));
        }
        if (opt_.dry_run)
            return dry_run_ok();
        const PseudoLabelSet filtered = filter_labels(labels, verdicts, opt_.threshold);
        save_pseudolabels(opt_.out, filtered);
        std::size_t ignored = 0;
        for (const auto& [k, p] : filtered.provenance)
            ignored += p.ignored ? 1 : 0;
        emit({{"verdicts", verdicts.size()}, {"ignored", ignored}, {"threshold", opt_.threshold}, {"out", opt_.out}});
        return kOk;
    }

    int cmd_eval()
    {
        const auto m = load_manifest(opt_.manifests.front());
        const PseudoLabelSet labels = load_pseudolabels(opt_.labels_dir);
        EvalConfig cfg{parse_eval_mode(opt_.mode), opt_.tolerance_frac, opt_.recall_thresholds};
        cfg.validate();
        if (opt_.dry_run)
            return dry_run_ok();
        const json report = report_to_json(evaluate(to_prediction(labels), m, cfg));
        if (!opt_.out.empty())
            detail::write_text(opt_.out, report.dump(2) + "\n");
        emit(report);
        return kOk;
    }

    int cmd_train()
    {
        const auto m = load_manifest(opt_.manifests.front());
        const LossConfig loss{parse_loss_kind(opt_.loss), opt_.tau};
        loss.validate();
        std::optional<PseudoLabelSet> labels;
        if (!opt_.labels_dir.empty())
            labels = load_pseudolabels(opt_.labels_dir);
        if (opt_.dry_run)
            return dry_run_ok();

        BoxToMaskConverter conv;
        conv.margin_frac = opt_.margin;
        conv.crop_size = opt_.crop_size;
        std::vector<TrainingSample> samples;
        for (const auto& s : m.sequences)
            for (const auto& o : s.objects)
                for (const auto& [f, box] : o.boxes) {
                    TargetMap target(s.width, s.height);
                    if (labels) {
                        const LabelMap& map = labels->frame(s.id, f);
                        for (std::size_t i = 0; i < map.size(); ++i)
                            target[i] = map[i] == kIgnore ? kIgnore : (map[i] == o.id ? 1 : kBackground);
                    } else {
                        auto ref = o.gt_masks.find(f);
                        if (ref == o.gt_masks.end())
                            continue;
                        const BinaryMask gt = resolve_mask(m, s, ref->second);
                        for (std::size_t i = 0; i < gt.size(); ++i)
                            target[i] = gt[i] ? 1 : kBackground;
                    }
                    const ImageTensor img = load_frame_image(m, s, f);
                    const Crop crop = stacked_crop(img, box, conv.margin_frac, conv.crop_size);
                    TrainingSample sample{extract_features(crop.tensor),
                                          crop_labels_with_margin(target, box, conv.margin_frac, conv.crop_size)};
                    if (std::any_of(sample.labels.data().begin(), sample.labels.data().end(), [](std::uint8_t v) { return v != kIgnore; }))
                        samples.push_back(std::move(sample));
                }
        require(!samples.empty(), ErrorCategory::validation, "no training samples (no masks or all pixels ignored)");
        const auto result = train(ToyModel(samples.front().features.dim), samples, loss, {opt_.steps, opt_.lr, false});
        json model_json = result.model;
        detail::write_text(fs::path(opt_.out) / "model.json", model_json.dump(1) + "\n");
        detail::write_text(fs::path(opt_.out) / "loss_trace.json",
                           json{{"loss", to_string(loss.kind)}, {"tau", loss.tau}, {"trace", result.loss_trace}}.dump(1) + "\n");
        emit({{"samples", samples.size()},
              {"steps", opt_.steps},
              {"initial_loss", result.loss_trace.front()},
              {"final_loss", result.loss_trace.back()},
              {"out", opt_.out}});
        return kOk;
    }

    int cmd_gradcheck()
    {
        require(opt_.instances >= 1 && opt_.size >= 1, ErrorCategory::usage, "--instances and --size must be positive");
        if (opt_.dry_run)
            return dry_run_ok();
        constexpr double kTolerance = 1e-4;
        std::mt19937_64 rng(opt_.seed);
        json per_loss = json::object();
        double worst = 0.0;
        for (const LossKind kind : {LossKind::plain_ce, LossKind::partially_huberised_ce}) {
            double max_rel = 0.0;
            for (int i = 0; i < opt_.instances; ++i) {
                const auto inst = random_instance(rng, opt_.size);
                const auto r = finite_difference_check(inst.model, inst.sample, {kind, 3.0}, opt_.fd_step);
                max_rel = std::max(max_rel, r.max_relative_error);
            }
            per_loss[to_string(kind)] = max_rel;
            worst = std::max(worst, max_rel);
        }
        const bool pass = worst < kTolerance;
        emit({{"seed", opt_.seed},
              {"instances", opt_.instances},
              {"max_relative_error", worst},
              {"per_loss", per_loss},
              {"tolerance", kTolerance},
              {"pass", pass}});
        return pass ? kOk : kCheckFailed;
    }

    int cmd_noise()
    {
        NoiseExperimentConfig cfg;
        cfg.noise = {parse_noise_kind(opt_.noise_kind), opt_.eta, 0};
        cfg.noise.validate();
        cfg.seeds = opt_.seeds;
        cfg.tau = opt_.tau;
        cfg.steps = opt_.steps;
        cfg.learning_rate = opt_.lr;
        if (!opt_.corpus_json.empty()) {
            try {
                const json spec = json::parse(opt_.corpus_json);
                cfg.train_corpus = spec.value("train", json::object()).get<synthetic::CorpusSpec>();
                cfg.val_corpus = spec.value("val", json::object()).get<synthetic::CorpusSpec>();
                cfg.crop_size = spec.value("crop_size", cfg.crop_size);
                cfg.margin_frac = spec.value("margin_frac", cfg.margin_frac);
            } catch (const json::exception& e) {
                fail(ErrorCategory::parse, std::string("--corpus: ") + e.what());
            }
        }
        LossConfig{LossKind::partially_huberised_ce, cfg.tau}.validate();
        if (opt_.dry_run)
            return dry_run_ok();
        const json report = noise_report_to_json(noise_experiment(cfg));
        if (!opt_.out.empty())
            detail::write_text(opt_.out, report.dump(2) + "\n");
        emit(report);
        return kOk;
    }

    int cmd_serve()
    {
        auto m = load_manifest(opt_.manifests.front());
        auto labels = load_pseudolabels(opt_.labels_dir);
        const fs::path log = opt_.log_path.empty() ? fs::path(opt_.labels_dir) / "decisions.ndjson" : fs::path(opt_.log_path);
        if (opt_.dry_run)
            return dry_run_ok();
        review::ReviewService service(std::move(m), std::move(labels), log);
        review::ReviewServer server(service);
        const int port = server.bind(opt_.host, opt_.port);
        out_ << "serving on http://" << opt_.host << ":" << port << " (log " << log.string() << ")" << std::endl;
        server.listen();
        return kOk;
    }

    int cmd_synth()
    {
        synthetic::CorpusSpec spec;
        spec.sequences = opt_.sequences;
        spec.frames = opt_.frames;
        spec.seed = opt_.seed;
        spec.validate();
        if (opt_.dry_run)
            return dry_run_ok();
        const auto corpus = synthetic::make_corpus(spec);
        const auto path = corpus.write(opt_.out);
        emit({{"manifest", path.string()}, {"sequences", spec.sequences}, {"frames", spec.frames}});
        return kOk;
    }

    std::ostream& out_;
    std::ostream& err_;
    Options opt_;
    std::function<int(CLI::App&)> dispatch_;
};

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    Runner r(out, err);
    return r.run(args);
}

} // namespace pseudovos::cli
