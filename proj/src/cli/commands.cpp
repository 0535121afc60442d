#include "lcps/cli/cli.hpp"

#include "lcps/data/folder.hpp"
#include "lcps/data/synthetic.hpp"
#include "lcps/engine/baselines.hpp"
#include "lcps/io/checkpoint.hpp"
#include "lcps/io/config.hpp"
#include "lcps/io/svg.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace lcps {

namespace {

using Scalar = float;

struct UsageError : Error {
    using Error::Error;
};

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IngestionError("cannot write '" + path.string() + "'");
    out << text;
}

void require_dir(const fs::path& p, const std::string& what)
{
    if (!fs::is_directory(p))
        throw UsageError(what + " '" + p.string() + "' does not exist");
}

void require_file(const fs::path& p, const std::string& what)
{
    if (!fs::is_regular_file(p))
        throw UsageError(what + " '" + p.string() + "' does not exist");
}

/// Flags shared by verbs that resolve a RunConfig.
struct ConfigFlags {
    std::string config;
    std::vector<std::string> sets;
    std::map<std::string, std::string> direct;

    void attach(CLI::App* app)
    {
        app->add_option("--config", config, "flat key = value config file");
        app->add_option("--set", sets, "override one key (key=value), repeatable");
        for (const auto& key : RunConfig::keys()) {
            std::string flag = "--" + key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            app->add_option_function<std::string>(flag, [this, key](const std::string& v) { direct[key] = v; },
                                                  "override '" + key + "'");
        }
    }

    /// Defaults, then `base`, then the config file, then --set, then direct flags.
    RunConfig resolve(RunConfig base = {}) const
    {
        if (!config.empty()) {
            require_file(config, "config file");
            base.merge_file(config);
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw UsageError("--set expects key=value, got '" + s + "'");
            base.set(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, v] : direct)
            base.set(k, v);
        base.validate();
        return base;
    }
};

std::vector<std::string> resolve_task_order(const RunConfig& cfg, const fs::path& data)
{
    if (!cfg.task_order.empty())
        return cfg.task_order;
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(data))
        if (e.is_directory() && fs::is_directory(e.path() / "images"))
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty())
        throw UsageError("no task folders (with an images/ subfolder) under '" + data.string() + "'");
    return names;
}

std::vector<TaskDataset> load_tasks(const RunConfig& cfg, const fs::path& data, const std::vector<std::string>& order)
{
    require_dir(data, "dataset root");
    std::vector<TaskDataset> tasks;
    for (const auto& name : order) {
        require_dir(data / name, "task folder");
        tasks.push_back(load_folder(data / name, cfg.continual.unet.image_side, cfg.continual.seed));
        tasks.back().name = name;
    }
    return tasks;
}

ExtractorSpec extractor_spec(const RunConfig& cfg, const std::string& embeddings)
{
    ExtractorSpec spec;
    spec.grid = cfg.grid;
    if (!embeddings.empty()) {
        require_file(embeddings, "embeddings file");
        spec.kind = "precomputed";
        spec.embeddings = embeddings;
    }
    return spec;
}

void print_summary(std::ostream& out, const MetricsMatrix& m)
{
    for (std::size_t s = 0; s < m.steps(); ++s) {
        out << "step " << s + 1;
        for (Routing r : m.routings())
            if (m.defined(r, s, s))
                out << "  " << routing_name(r) << " avg mIoU " << format_double(m.average(r, s)).substr(0, 6);
        if (const auto acc = m.accuracy(s))
            out << "  task-id acc " << format_double(*acc).substr(0, 6);
        out << "\n";
    }
}

// ---------------------------------------------------------------- generate

struct GenerateCmd {
    ConfigFlags flags;
    std::string out_dir;
    std::vector<std::string> kinds{"scratches", "patches", "inclusions"};
    int count = 120;

    void attach(CLI::App* app)
    {
        flags.attach(app);
        app->add_option("--out", out_dir, "output root; one folder per kind")->required();
        app->add_option("--kinds", kinds, "defect kinds")->delimiter(',');
        app->add_option("--count", count, "images per kind");
    }

    int run(std::ostream& out)
    {
        const RunConfig cfg = flags.resolve();
        std::vector<SyntheticKind> parsed;
        for (const auto& k : kinds) {
            try {
                parsed.push_back(parse_kind(k));
            } catch (const ConfigError& e) {
                throw UsageError(e.what());
            }
        }
        for (SyntheticKind k : parsed) {
            TaskDataset t = generate_task(k, count, cfg.continual.unet.image_side, cfg.continual.seed);
            write_folder(fs::path(out_dir) / std::string(kind_name(k)), t);
            out << "wrote " << t.train.size() + t.test.size() << " images to "
                << (fs::path(out_dir) / std::string(kind_name(k))).string() << "\n";
        }
        return 0;
    }
};

// ---------------------------------------------------------------- train

struct TrainCmd {
    ConfigFlags flags;
    std::string data;
    std::string method = "lda-cps";
    std::string out_dir = "run";
    std::string manifest;
    std::string embeddings;
    bool verbose = false;

    void attach(CLI::App* app)
    {
        flags.attach(app);
        app->add_option("--data", data, "dataset root with one folder per task");
        app->add_option("--method", method, "lda-cps, finetune, joint, single or regularized");
        app->add_option("--out", out_dir, "artifact directory");
        app->add_option("--manifest", manifest, "re-run a previous manifest");
        app->add_option("--embeddings", embeddings, "precomputed embedding file for the task classifier");
        app->add_flag("--verbose", verbose, "log every epoch");
    }

    int run(std::ostream& out, std::ostream& err)
    {
        RunManifest m;
        if (!manifest.empty()) {
            require_file(manifest, "manifest");
            m = RunManifest::load(manifest);
            if (m.tool_version != RunManifest::kToolVersion)
                err << "warning: manifest written by '" << m.tool_version << "'\n";
        }
        m.config = flags.resolve(m.config);
        if (!data.empty())
            m.data = data;
        if (m.data.empty())
            throw UsageError("--data is required");
        if (method != "lda-cps" || manifest.empty())
            m.method = method;
        if (m.method != "lda-cps")
            try {
                parse_baseline(m.method);
            } catch (const ConfigError& e) {
                throw UsageError(e.what());
            }
        require_dir(m.data, "dataset root");
        if (m.config.task_order.empty())
            m.config.task_order = resolve_task_order(m.config, m.data);
        const std::vector<TaskDataset> tasks = load_tasks(m.config, m.data, m.config.task_order);
        if (!embeddings.empty())
            m.artifacts["embeddings"] = embeddings;
        const ExtractorSpec spec = extractor_spec(m.config, m.artifacts.contains("embeddings") ? m.artifacts["embeddings"] : "");

        const fs::path dir(out_dir);
        fs::create_directories(dir);
        m.artifacts["checkpoint"] = (dir / "checkpoint.lcps").string();
        m.artifacts["metrics"] = (dir / "metrics.csv").string();
        m.save(dir / "manifest.txt");
        const std::string manifest_text = m.to_text();
        const ContinualConfig& cc = m.config.continual;

        MetricsMatrix metrics;
        if (m.method == "lda-cps") {
            const auto extractor = spec.make(cc.unet.image_side);
            ContinualObserver<Scalar> obs;
            if (verbose)
                obs.on_epoch = [&err](std::size_t t, std::string_view phase, int e, double loss) {
                    err << "task " << t + 1 << " " << phase << " epoch " << e << " loss " << loss << "\n";
                };
            obs.on_step = [&](std::size_t step, const ContinualState<Scalar>& st, const MetricsMatrix& mm) {
                save_checkpoint(dir / "checkpoint.lcps", Checkpoint<Scalar>{st, spec, manifest_text});
                err << "task " << step + 1 << " (" << st.tasks[step] << ") frozen, free kernels "
                    << format_double(free_fraction(st.registry)).substr(0, 6) << "\n";
                (void)mm;
            };
            ContinualResult<Scalar> r = run_continual<Scalar>(tasks, cc, *extractor, obs);
            for (const auto& w : r.warnings)
                err << "warning: " << w << "\n";
            metrics = std::move(r.metrics);
        } else {
            std::function<void(std::size_t, int, double)> hook;
            if (verbose)
                hook = [&err](std::size_t t, int e, double loss) {
                    err << "step " << t + 1 << " epoch " << e << " loss " << loss << "\n";
                };
            BaselineResult<Scalar> r = run_baseline<Scalar>(parse_baseline(m.method), tasks, cc, m.config.lambda,
                                                            squared_gradient_omega<Scalar>, hook);
            ContinualState<Scalar> st{std::move(r.model), MaskRegistry{}, LdaState{}, m.config.task_order};
            st.registry = MaskRegistry(st.model.kernel_space());
            save_checkpoint(dir / "checkpoint.lcps", Checkpoint<Scalar>{std::move(st), spec, manifest_text});
            metrics = std::move(r.metrics);
        }
        write_text(dir / "metrics.csv", metrics.csv());
        print_summary(out, metrics);
        out << "artifacts in " << dir.string() << "\n";
        return 0;
    }
};

// ---------------------------------------------------------------- evaluate

MetricsMatrix evaluate_checkpoint(const Checkpoint<Scalar>& ck, const std::vector<TaskDataset>& tasks,
                                  const std::vector<Routing>& routings, double threshold)
{
    const ContinualState<Scalar>& st = ck.state;
    const std::size_t last = tasks.size() - 1;
    if (st.task_count() == 0) {
        MetricsMatrix m(st.tasks, {Routing::none});
        for (std::size_t t = 0; t < tasks.size(); ++t)
            m.set(Routing::none, last, t, mean_iou(st.model, std::span<const ImageSample>(tasks[t].test), nullptr, 0,
                                                   threshold));
        return m;
    }
    MetricsMatrix m(st.tasks, routings);
    const auto extractor = ck.extractor.make(st.model.config().image_side);
    evaluate_step(st, *extractor, std::span<const TaskDataset>(tasks), last, threshold, m);
    return m;
}

struct EvaluateCmd {
    std::string checkpoint;
    std::string data;
    std::string routing = "both";
    std::string out_path;
    double threshold = 0.5;

    void attach(CLI::App* app)
    {
        app->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
        app->add_option("--data", data, "dataset root with one folder per task")->required();
        app->add_option("--routing", routing, "oracle, lda or both");
        app->add_option("--out", out_path, "metrics CSV (stdout when omitted)");
        app->add_option("--threshold", threshold, "binarization threshold");
    }

    int run(std::ostream& out)
    {
        require_file(checkpoint, "checkpoint");
        require_dir(data, "dataset root");
        std::vector<Routing> routings;
        if (routing == "both")
            routings = {Routing::oracle, Routing::lda};
        else
            try {
                routings = {parse_routing(routing)};
            } catch (const ConfigError& e) {
                throw UsageError(e.what());
            }
        const Checkpoint<Scalar> ck = load_checkpoint<Scalar>(checkpoint);
        RunConfig cfg;
        if (!ck.manifest.empty())
            cfg = RunManifest::parse(ck.manifest, checkpoint + " (manifest)").config;
        cfg.continual.unet.image_side = ck.state.model.config().image_side;
        const std::vector<TaskDataset> tasks = load_tasks(cfg, data, ck.state.tasks);
        const MetricsMatrix m = evaluate_checkpoint(ck, tasks, routings, threshold);
        if (out_path.empty())
            out << m.csv();
        else {
            write_text(out_path, m.csv());
            print_summary(out, m);
        }
        return 0;
    }
};

// ---------------------------------------------------------------- sweep

struct SweepCmd {
    ConfigFlags flags;
    std::string data;
    std::string out_dir = "sweep";
    std::vector<double> alphas{0.85, 0.9, 0.95};
    std::vector<int> iters{2, 3};

    void attach(CLI::App* app)
    {
        flags.attach(app);
        app->add_option("--data", data, "dataset root with one folder per task")->required();
        app->add_option("--out", out_dir, "output directory for sweep.csv and sweep.svg");
        app->add_option("--alphas", alphas, "alpha grid")->delimiter(',');
        app->add_option("--iters", iters, "pruning-iteration grid")->delimiter(',');
    }

    int run(std::ostream& out, std::ostream& err)
    {
        RunConfig cfg = flags.resolve();
        require_dir(data, "dataset root");
        if (alphas.empty() || iters.empty())
            throw UsageError("sweep grids must be non-empty");
        if (cfg.task_order.empty())
            cfg.task_order = resolve_task_order(cfg, data);
        const std::vector<TaskDataset> tasks = load_tasks(cfg, data, cfg.task_order);
        const auto extractor = extractor_spec(cfg, "").make(cfg.continual.unet.image_side);

        std::string csv = "alpha,num_iters,step,avg_miou,free_fraction,status\n";
        std::vector<Series> series;
        for (double a : alphas)
            for (int it : iters) {
                RunConfig cell = cfg;
                cell.continual.prune.alpha = a;
                cell.continual.prune.num_iters = it;
                const std::string label = "alpha=" + format_double(a) + " iters=" + std::to_string(it);
                try {
                    cell.validate();
                    const auto r = run_continual<Scalar>(tasks, cell.continual, *extractor);
                    Series s{label, {}};
                    for (const auto& w : r.warnings)
                        err << "warning: " << label << ": " << w << "\n";
                    const std::string status = r.warnings.empty() ? "ok" : "collapsed";
                    for (std::size_t step = 0; step < tasks.size(); ++step) {
                        s.y.push_back(r.metrics.average(Routing::lda, step));
                        csv += format_double(a) + "," + std::to_string(it) + "," + std::to_string(step + 1) + ","
                               + format_double(s.y.back()) + "," + format_double(r.free_fractions[step]) + "," + status + "\n";
                    }
                    series.push_back(std::move(s));
                    err << label << " done\n";
                } catch (const Error& e) {
                    std::string msg = e.what();
                    std::replace(msg.begin(), msg.end(), ',', ';');
                    std::replace(msg.begin(), msg.end(), '\n', ' ');
                    csv += format_double(a) + "," + std::to_string(it) + ",,,,error: " + msg + "\n";
                    err << label << " failed: " << e.what() << "\n";
                }
            }
        fs::create_directories(out_dir);
        write_text(fs::path(out_dir) / "sweep.csv", csv);
        write_text(fs::path(out_dir) / "sweep.svg",
                   line_chart_svg("LDA-CP&S average mIoU per incremental step", "incremental step",
                                  "average mIoU", series));
        out << csv;
        return 0;
    }
};

// ---------------------------------------------------------------- predict

struct PredictCmd {
    std::string checkpoint;
    std::string image;
    std::string out_path = "mask.png";
    std::optional<double> threshold;

    void attach(CLI::App* app)
    {
        app->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
        app->add_option("--image", image, "grayscale PNG or PGM")->required();
        app->add_option("--out", out_path, "mask output (PNG or PGM, values 0/255)");
        app->add_option("--threshold", threshold, "binarization threshold (default: the run's)");
    }

    int run(std::ostream& out)
    {
        require_file(checkpoint, "checkpoint");
        require_file(image, "image");
        const Checkpoint<Scalar> ck = load_checkpoint<Scalar>(checkpoint);
        const ContinualState<Scalar>& st = ck.state;
        if (st.task_count() == 0)
            throw StateError("checkpoint '" + checkpoint + "' holds no task subnetworks (baseline run?)");
        double thr = 0.5;
        if (!ck.manifest.empty())
            thr = RunManifest::parse(ck.manifest).config.continual.threshold;
        if (threshold)
            thr = *threshold;
        const Index side = st.model.config().image_side;
        GrayImage img = to_gray(read_image8(image));
        const Index rows = img.rows(), cols = img.cols();
        img = resize_bilinear(img, side, side);
        const auto extractor = ck.extractor.make(side);
        const Inference r = infer(st, *extractor, img, fs::path(image).stem().string(), thr);
        const BinaryMask mask = resize_nearest(r.mask, rows, cols);
        write_image8(out_path, mask_to_image8(mask));
        out << "task " << r.task + 1 << " " << st.tasks[static_cast<std::size_t>(r.task)] << "\n";
        return 0;
    }
};

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Continual prune-and-select segmentation with LDA task routing", "lcps"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(RunManifest::kToolVersion));
    GenerateCmd generate;
    TrainCmd train;
    EvaluateCmd evaluate;
    SweepCmd sweep;
    PredictCmd predict;
    CLI::App* g = app.add_subcommand("generate", "render synthetic defect datasets");
    CLI::App* t = app.add_subcommand("train", "run LDA-CP&S or a baseline over a task sequence");
    CLI::App* e = app.add_subcommand("evaluate", "score a checkpoint on task test splits");
    CLI::App* s = app.add_subcommand("sweep", "alpha x pruning-iteration grid");
    CLI::App* p = app.add_subcommand("predict", "route and segment one image");
    generate.attach(g);
    train.attach(t);
    evaluate.attach(e);
    sweep.attach(s);
    predict.attach(p);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& pe) {
        return app.exit(pe, out, err) == 0 ? 0 : 1;
    }
    try {
        if (g->parsed())
            return generate.run(out);
        if (t->parsed())
            return train.run(out, err);
        if (e->parsed())
            return evaluate.run(out);
        if (s->parsed())
            return sweep.run(out, err);
        return predict.run(out);
    } catch (const UsageError& ex) {
        err << "usage error: " << ex.what() << "\n";
        return 1;
    } catch (const ConfigError& ex) {
        err << "usage error: " << ex.what() << "\n";
        return 1;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return 2;
    }
}

} // namespace lcps
