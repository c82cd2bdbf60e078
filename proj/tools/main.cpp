// noiselab CLI: orchestrates the clean-training -> noise-generation ->
// noisy-training -> report pipeline over reproducible run directories.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "noiselab/config.hpp"
#include "noiselab/dataset.hpp"
#include "noiselab/errors.hpp"
#include "noiselab/harness.hpp"
#include "noiselab/noise.hpp"
#include "noiselab/report.hpp"
#include "noiselab/util.hpp"
#include "noiselab/version.hpp"

namespace fs = std::filesystem;
using namespace noiselab;

namespace {

int exit_code_for(const std::exception& err) {
    if (dynamic_cast<const ConfigError*>(&err)) return 2;
    if (dynamic_cast<const NumericError*>(&err)) return 3;
    if (dynamic_cast<const SelectionError*>(&err)) return 4;
    if (dynamic_cast<const IngestError*>(&err)) return 5;
    return 1;
}

std::uint64_t env_thread_cap() {
    const char* raw = std::getenv("NOISELAB_THREADS");
    if (raw == nullptr) return 1;
    try {
        const auto value = parse_u64(raw, "NOISELAB_THREADS");
        return value == 0 ? 1 : value;
    } catch (const IngestError&) {
        throw ConfigError("NOISELAB_THREADS is not an unsigned integer");
    }
}

// Run manifest: resolved settings, inputs and outputs of one command,
// written to <out>/manifest.txt on success and on failure. Plain text, so
// rerun comparisons of CSV/SVG artifacts stay byte-exact while the
// manifest is free to carry the wall-clock duration.
struct Manifest {
    std::string command;
    fs::path out_dir;
    std::map<std::string, std::string> fields;
    std::chrono::steady_clock::time_point start =
        std::chrono::steady_clock::now();

    void put(const std::string& key, const std::string& value) {
        fields[key] = value;
    }

    void write(const std::string& status, const std::string& error) {
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start);
        std::string out;
        out += "command = " + command + "\n";
        out += "version = " + std::string(kVersion) + "\n";
        out += "status = " + status + "\n";
        if (!error.empty()) {
            out += "error = " + error + "\n";
        }
        out += "duration_ms = " + format_u64(elapsed.count()) + "\n";
        out += "threads = " + format_u64(env_thread_cap()) + "\n";
        for (const auto& [key, value] : fields) {
            out += key + " = " + value + "\n";
        }
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        write_text_file((out_dir / "manifest.txt").string(), out);
    }
};

template <typename Fn>
int run_command(const std::string& name, const std::string& out_dir, Fn&& fn) {
    Manifest manifest;
    manifest.command = name;
    manifest.out_dir = out_dir;
    try {
        fs::create_directories(out_dir);
        fn(manifest);
        manifest.write("ok", "");
        return 0;
    } catch (const std::exception& err) {
        std::cerr << "noiselab " << name << ": " << err.what() << "\n";
        try {
            manifest.write("error", err.what());
        } catch (const std::exception&) {
            // manifest is best-effort on failure paths
        }
        return exit_code_for(err);
    }
}

// ---------------------------------------------------------------------------
// config -> domain objects

constexpr std::string_view kKnownKeys[] = {
    "dataset.kind", "dataset.classes", "dataset.per_class", "dataset.dim",
    "dataset.confusability", "dataset.seed", "dataset.path", "dataset.images",
    "dataset.labels", "dataset.test_fraction", "dataset.split_seed",
    "model.kind", "model.hidden", "model.init_seed",
    "train.epochs", "train.batch_size", "train.lr", "train.schedule",
    "train.shuffle_seed", "train.method", "train.sce_a", "train.sce_b",
    "train.sce_clamp", "train.gce_q", "train.boot_b", "train.coteach_tau",
    "train.coteach_warmup",
};

void record(Manifest& manifest, const std::string& key, const std::string& value) {
    manifest.put("config." + key, value);
}

LabeledDataset build_clean_dataset(const KvConfig& cfg, Manifest& manifest) {
    const std::string kind = cfg.get_string("dataset.kind", "blobs");
    record(manifest, "dataset.kind", kind);
    if (kind == "blobs") {
        const auto classes = cfg.get_u64("dataset.classes", 4);
        const auto per_class = cfg.get_u64("dataset.per_class", 250);
        const auto dim = cfg.get_u64("dataset.dim", 8);
        const double confusability = cfg.get_double("dataset.confusability", 0.5);
        const auto seed = cfg.get_u64("dataset.seed", 1);
        record(manifest, "dataset.classes", format_u64(classes));
        record(manifest, "dataset.per_class", format_u64(per_class));
        record(manifest, "dataset.dim", format_u64(dim));
        record(manifest, "dataset.confusability", format_double(confusability));
        record(manifest, "dataset.seed", format_u64(seed));
        return gen_confusable_blobs(classes, per_class, dim, confusability, seed);
    }
    if (kind == "csv") {
        const std::string path = cfg.require_string("dataset.path");
        record(manifest, "dataset.path", path);
        return load_csv(path);
    }
    if (kind == "idx") {
        const std::string images = cfg.require_string("dataset.images");
        const std::string labels = cfg.require_string("dataset.labels");
        record(manifest, "dataset.images", images);
        record(manifest, "dataset.labels", labels);
        return load_idx(images, labels);
    }
    throw ConfigError("dataset.kind must be blobs, csv or idx (got '" + kind +
                      "')");
}

std::vector<std::size_t> parse_hidden(const std::string& text) {
    std::vector<std::size_t> widths;
    if (trim(text).empty()) return widths;
    for (auto piece : split(text, ',')) {
        widths.push_back(parse_u64(trim(piece), "model.hidden"));
    }
    return widths;
}

ModelSpec build_model_spec(const KvConfig& cfg, const LabeledDataset& data,
                           Manifest& manifest) {
    ModelSpec spec;
    const std::string kind = cfg.get_string("model.kind", "mlp");
    spec.kind = model_kind_from_string(kind);
    spec.classes = data.classes;
    spec.init_seed = cfg.get_u64("model.init_seed", 1);
    record(manifest, "model.kind", kind);
    record(manifest, "model.init_seed", format_u64(spec.init_seed));
    if (spec.kind == ModelKind::Mlp) {
        spec.input_dim = data.dim();
        const std::string hidden = cfg.get_string("model.hidden", "32");
        try {
            spec.hidden = parse_hidden(hidden);
        } catch (const IngestError&) {
            throw ConfigError("model.hidden must be a comma list of widths");
        }
        record(manifest, "model.hidden", hidden);
    } else {
        if (!data.image_shape) {
            throw ConfigError("model.kind cnn-s requires an image-shaped dataset");
        }
        spec.input_h = data.image_shape->h;
        spec.input_w = data.image_shape->w;
        spec.input_c = data.image_shape->c;
    }
    spec.validate();
    return spec;
}

TrainConfig build_train_config(const KvConfig& cfg,
                               std::optional<std::uint64_t> seed_override,
                               Manifest& manifest) {
    TrainConfig config;
    config.epochs = cfg.require_u64("train.epochs");
    config.batch_size = cfg.get_u64("train.batch_size", 128);
    config.lr = cfg.get_double("train.lr", 1e-3);
    config.schedule = ScheduleSpec::named(cfg.get_string("train.schedule", "decay1"));
    config.shuffle_seed =
        seed_override.value_or(cfg.get_u64("train.shuffle_seed", 1));
    config.method = method_from_string(cfg.get_string("train.method", "standard"));
    config.method_params.sce_a = cfg.get_double("train.sce_a", 0.1);
    config.method_params.sce_b = cfg.get_double("train.sce_b", 1.0);
    config.method_params.sce_clamp = cfg.get_double("train.sce_clamp", -4.0);
    config.method_params.gce_q = cfg.get_double("train.gce_q", 0.7);
    config.method_params.boot_b = cfg.get_double("train.boot_b", 0.95);
    config.method_params.coteach_tau = cfg.get_double("train.coteach_tau", 0.2);
    config.method_params.coteach_warmup = cfg.get_u64("train.coteach_warmup", 10);
    config.validate();

    record(manifest, "train.epochs", format_u64(config.epochs));
    record(manifest, "train.batch_size", format_u64(config.batch_size));
    record(manifest, "train.lr", format_double(config.lr));
    record(manifest, "train.schedule", config.schedule.name);
    record(manifest, "train.shuffle_seed", format_u64(config.shuffle_seed));
    record(manifest, "train.method", to_string(config.method));
    record(manifest, "train.sce_a", format_double(config.method_params.sce_a));
    record(manifest, "train.sce_b", format_double(config.method_params.sce_b));
    record(manifest, "train.sce_clamp",
           format_double(config.method_params.sce_clamp));
    record(manifest, "train.gce_q", format_double(config.method_params.gce_q));
    record(manifest, "train.boot_b", format_double(config.method_params.boot_b));
    record(manifest, "train.coteach_tau",
           format_double(config.method_params.coteach_tau));
    record(manifest, "train.coteach_warmup",
           format_u64(config.method_params.coteach_warmup));
    return config;
}

void copy_config(const std::string& config_path, const fs::path& out_dir) {
    fs::copy_file(config_path, out_dir / "config.txt",
                  fs::copy_options::overwrite_existing);
}

void write_stats_csv(const LabeledDataset& noisy, const fs::path& out_dir) {
    const auto transition =
        estimate_transition(noisy.true_labels, noisy.observed_labels, noisy.classes);
    save_transition(transition, (out_dir / "transition.csv").string());
    const auto stats = alpha_beta(transition);
    const std::string csv = "tau,alpha,beta\n" + format_double(stats.tau) + "," +
                            format_double(stats.alpha) + "," +
                            format_double(stats.beta) + "\n";
    write_text_file((out_dir / "stats.csv").string(), csv);
}

// ---------------------------------------------------------------------------
// commands

int cmd_train_clean(const std::string& config_path, const std::string& out,
                    std::optional<std::uint64_t> seed) {
    return run_command("train-clean", out, [&](Manifest& manifest) {
        manifest.put("input.config", config_path);
        const KvConfig cfg = KvConfig::parse_file(config_path);
        cfg.check_known(kKnownKeys);

        LabeledDataset full = build_clean_dataset(cfg, manifest);
        SplitSpec split_spec;
        split_spec.test_fraction = cfg.get_double("dataset.test_fraction", 0.2);
        split_spec.shuffle_seed = cfg.get_u64("dataset.split_seed", 7);
        record(manifest, "dataset.test_fraction",
               format_double(split_spec.test_fraction));
        record(manifest, "dataset.split_seed", format_u64(split_spec.shuffle_seed));
        auto [train, test] = split(full, split_spec);

        const ModelSpec model_spec = build_model_spec(cfg, train, manifest);
        const TrainConfig train_config = build_train_config(cfg, seed, manifest);

        const SnapshotSet snapshots = train_clean(train, model_spec, train_config);

        const fs::path dir(out);
        save_csv(train, (dir / "train.csv").string());
        save_csv(test, (dir / "test.csv").string());
        save_snapshots(snapshots.snapshots, out);
        copy_config(config_path, dir);
        manifest.put("output.train", (dir / "train.csv").string());
        manifest.put("output.test", (dir / "test.csv").string());
        manifest.put("output.snapshots", (dir / "snapshots.csv").string());
        manifest.put("run.final_train_acc",
                     format_double(snapshots.snapshots.back().train_accuracy));
    });
}

int cmd_make_noise(const std::string& kind, const std::string& out,
                   const std::string& dataset_path,
                   const std::string& snapshots_dir,
                   const std::string& matrix_path, double tau, double tolerance,
                   std::optional<double> alpha, std::optional<double> beta,
                   std::uint64_t seed) {
    return run_command("make-noise", out, [&](Manifest& manifest) {
        if (kind != "pseudo" && kind != "randomized" && kind != "symmetric" &&
            kind != "asymmetric") {
            throw ConfigError(
                "noise kind must be pseudo, randomized, symmetric or asymmetric");
        }
        manifest.put("config.kind", kind);
        manifest.put("config.seed", format_u64(seed));

        std::string clean_path = dataset_path;
        if (kind == "pseudo") {
            if (snapshots_dir.empty()) {
                throw ConfigError("make-noise pseudo requires --snapshots");
            }
            if (clean_path.empty()) {
                clean_path = (fs::path(snapshots_dir) / "train.csv").string();
            }
        } else if (clean_path.empty()) {
            throw ConfigError("make-noise " + kind + " requires --dataset");
        }
        manifest.put("input.dataset", clean_path);
        const LabeledDataset clean = load_csv(clean_path);

        LabeledDataset noisy;
        if (kind == "pseudo") {
            manifest.put("input.snapshots", snapshots_dir);
            manifest.put("config.tau", format_double(tau));
            manifest.put("config.tolerance", format_double(tolerance));
            auto snapshots = load_snapshots(snapshots_dir);
            annotate_snapshot_stats(snapshots, clean.true_labels, clean.classes);
            std::optional<std::pair<double, double>> target;
            if (alpha.has_value() != beta.has_value()) {
                throw ConfigError("--alpha and --beta must be given together");
            }
            if (alpha) {
                target = std::make_pair(*alpha, *beta);
                manifest.put("config.alpha", format_double(*alpha));
                manifest.put("config.beta", format_double(*beta));
            }
            const auto snapshot = select_snapshot(snapshots, tau, tolerance, target);
            manifest.put("run.snapshot_epoch", format_u64(snapshot.epoch));
            manifest.put("run.snapshot_acc",
                         format_double(snapshot.train_accuracy));
            noisy = pseudo_noise(clean, snapshot);
        } else if (kind == "randomized") {
            if (matrix_path.empty()) {
                throw ConfigError("make-noise randomized requires --matrix");
            }
            manifest.put("input.matrix", matrix_path);
            const TransitionMatrix transition = load_transition(matrix_path);
            noisy = randomized_noise(clean, transition, seed);
        } else if (kind == "symmetric") {
            manifest.put("config.tau", format_double(tau));
            noisy = symmetric_noise(clean, tau, seed);
        } else {
            manifest.put("config.tau", format_double(tau));
            noisy = asymmetric_noise(clean, tau, seed);
        }

        const fs::path dir(out);
        save_noisy(noisy, (dir / "noisy.csv").string());
        write_stats_csv(noisy, dir);
        manifest.put("output.noisy", (dir / "noisy.csv").string());
        manifest.put("output.transition", (dir / "transition.csv").string());
        manifest.put("output.stats", (dir / "stats.csv").string());
        manifest.put("run.noise_rate", format_double(noisy.noise_rate()));
    });
}

int cmd_train_noisy(const std::string& config_path, const std::string& noisy_path,
                    const std::string& test_path, const std::string& out,
                    std::optional<std::uint64_t> seed) {
    return run_command("train-noisy", out, [&](Manifest& manifest) {
        manifest.put("input.config", config_path);
        manifest.put("input.noisy", noisy_path);
        manifest.put("input.test", test_path);
        const KvConfig cfg = KvConfig::parse_file(config_path);
        cfg.check_known(kKnownKeys);

        const LabeledDataset train = load_noisy(noisy_path);
        const LabeledDataset test = load_csv(test_path);
        if (test.classes != train.classes) {
            throw ConfigError("train/test class counts disagree");
        }

        const ModelSpec model_spec = build_model_spec(cfg, train, manifest);
        const TrainConfig train_config = build_train_config(cfg, seed, manifest);
        const RunRecord rec = train_noisy(train, test, model_spec, train_config);

        const fs::path dir(out);
        emit_metrics_csv(rec, (dir / "metrics.csv").string());
        copy_config(config_path, dir);
        manifest.put("output.metrics", (dir / "metrics.csv").string());
        manifest.put("run.method", to_string(train_config.method));
        manifest.put("run.noise_type", to_string(train.provenance));
        manifest.put("run.tau", format_double(train.noise_rate()));
        manifest.put("run.mota_epoch", format_u64(rec.mota_epoch));
        manifest.put("run.acc_mota", format_double(rec.acc_at_mota));
        manifest.put("run.acc_final", format_double(rec.acc_at_final));
    });
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out) {
    return run_command("report", out, [&](Manifest& manifest) {
        std::vector<ComparisonRow> rows;
        std::vector<std::pair<std::string, RunRecord>> named;
        for (std::size_t i = 0; i < run_dirs.size(); ++i) {
            const fs::path dir(run_dirs[i]);
            manifest.put("input.run" + format_u64(i), dir.string());
            std::string method, noise_type, tau_text;
            try {
                const KvConfig run_manifest =
                    KvConfig::parse_file((dir / "manifest.txt").string());
                method = run_manifest.require_string("run.method");
                noise_type = run_manifest.require_string("run.noise_type");
                tau_text = run_manifest.require_string("run.tau");
            } catch (const ConfigError& err) {
                throw IngestError("incomplete run dir " + dir.string() + ": " +
                                  err.what());
            }
            RunRecord record = read_metrics_csv((dir / "metrics.csv").string());
            const double tau = parse_double(tau_text, dir.string() + ": run.tau");
            rows.push_back(make_comparison_row(method, noise_type, tau, record));
            named.emplace_back(dir.filename().string(), std::move(record));
        }
        const fs::path dir(out);
        emit_summary(rows, (dir / "summary.csv").string());
        emit_svg_curves(named, CurvePanel::Accuracy,
                        (dir / "accuracy.svg").string());
        emit_svg_curves(named, CurvePanel::LabelRecall,
                        (dir / "label_recall.svg").string());
        manifest.put("output.summary", (dir / "summary.csv").string());
        manifest.put("output.accuracy_svg", (dir / "accuracy.svg").string());
        manifest.put("output.label_recall_svg",
                     (dir / "label_recall.svg").string());
    });
}

int cmd_analyze(const std::string& dataset_path) {
    try {
        const LabeledDataset data = load_csv(dataset_path);
        const auto transition =
            estimate_transition(data.true_labels, data.observed_labels, data.classes);
        const auto stats = alpha_beta(transition);
        std::cout << "n = " << data.size() << "\n";
        std::cout << "C = " << data.classes << "\n";
        std::cout << "provenance = " << to_string(data.provenance) << "\n";
        std::cout << "tau = " << format_double(stats.tau) << "\n";
        std::cout << "alpha = " << format_double(stats.alpha) << "\n";
        std::cout << "beta = " << format_double(stats.beta) << "\n";
        std::cout << "N_ij:\n";
        for (std::size_t i = 0; i < transition.classes(); ++i) {
            for (std::size_t j = 0; j < transition.classes(); ++j) {
                if (j > 0) std::cout << ",";
                std::cout << format_double(transition.n_ij(i, j));
            }
            std::cout << "\n";
        }
        return 0;
    } catch (const std::exception& err) {
        std::cerr << "noiselab analyze: " << err.what() << "\n";
        return exit_code_for(err);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"noiselab: feature-dependent label-noise laboratory"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path, out_dir, dataset_path, snapshots_dir, matrix_path;
    std::string noisy_path, test_path, noise_kind;
    std::vector<std::string> run_dirs;
    double tau = 0.2;
    double tolerance = 0.02;
    std::optional<double> alpha_target, beta_target;
    std::optional<std::uint64_t> seed_override;
    std::uint64_t noise_seed = 1;

    auto* train_clean_cmd = app.add_subcommand(
        "train-clean", "train on a clean dataset and capture per-epoch snapshots");
    train_clean_cmd->add_option("--config", config_path, "config file")->required();
    train_clean_cmd->add_option("--out", out_dir, "run directory")->required();
    train_clean_cmd->add_option("--seed", seed_override,
                                "override train.shuffle_seed");

    auto* make_noise_cmd = app.add_subcommand(
        "make-noise", "generate a noisy dataset with ground truth");
    make_noise_cmd
        ->add_option("kind", noise_kind,
                     "pseudo | randomized | symmetric | asymmetric")
        ->required();
    make_noise_cmd->add_option("--out", out_dir, "run directory")->required();
    make_noise_cmd->add_option("--dataset", dataset_path,
                               "clean dataset CSV (defaults to "
                               "<snapshots>/train.csv for pseudo)");
    make_noise_cmd->add_option("--snapshots", snapshots_dir,
                               "train-clean run directory (pseudo)");
    make_noise_cmd->add_option("--matrix", matrix_path,
                               "transition matrix CSV (randomized)");
    make_noise_cmd->add_option("--tau", tau, "target noise rate");
    make_noise_cmd->add_option("--tolerance", tolerance,
                               "snapshot accuracy tolerance (pseudo)");
    make_noise_cmd->add_option("--alpha", alpha_target,
                               "target alpha for snapshot selection");
    make_noise_cmd->add_option("--beta", beta_target,
                               "target beta for snapshot selection");
    make_noise_cmd->add_option("--seed", noise_seed, "noise generator seed");

    auto* train_noisy_cmd = app.add_subcommand(
        "train-noisy", "train a noise-robust method on a noisy dataset");
    train_noisy_cmd->add_option("--config", config_path, "config file")->required();
    train_noisy_cmd->add_option("--noisy", noisy_path, "noisy dataset CSV")
        ->required();
    train_noisy_cmd->add_option("--test", test_path, "clean test CSV")->required();
    train_noisy_cmd->add_option("--out", out_dir, "run directory")->required();
    train_noisy_cmd->add_option("--seed", seed_override,
                                "override train.shuffle_seed");

    auto* report_cmd = app.add_subcommand(
        "report", "summarize train-noisy runs into CSV tables and SVG curves");
    report_cmd->add_option("--out", out_dir, "report directory")->required();
    report_cmd->add_option("runs", run_dirs, "train-noisy run directories")
        ->required();

    auto* analyze_cmd =
        app.add_subcommand("analyze", "print tau/alpha/beta/N_ij of a dataset");
    analyze_cmd->add_option("--dataset", dataset_path, "dataset CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (train_clean_cmd->parsed()) {
            return cmd_train_clean(config_path, out_dir, seed_override);
        }
        if (make_noise_cmd->parsed()) {
            return cmd_make_noise(noise_kind, out_dir, dataset_path, snapshots_dir,
                                  matrix_path, tau, tolerance, alpha_target,
                                  beta_target, noise_seed);
        }
        if (train_noisy_cmd->parsed()) {
            return cmd_train_noisy(config_path, noisy_path, test_path, out_dir,
                                   seed_override);
        }
        if (report_cmd->parsed()) {
            return cmd_report(run_dirs, out_dir);
        }
        if (analyze_cmd->parsed()) {
            return cmd_analyze(dataset_path);
        }
    } catch (const std::exception& err) {
        std::cerr << "noiselab: " << err.what() << "\n";
        return exit_code_for(err);
    }
    return 2;
}
