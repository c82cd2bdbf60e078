#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include "noiselab/dataset.hpp"
#include "noiselab/noise.hpp"
#include "noiselab/util.hpp"
#include "test_util.hpp"

using namespace noiselab;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const std::string& capture = "") {
    std::string cmd = std::string(NOISELAB_BIN) + " " + args;
    if (!capture.empty()) {
        cmd += " > " + capture + " 2>&1";
    } else {
        cmd += " > /dev/null 2>&1";
    }
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

const char* kPipelineConfig =
    "# desk-scale pipeline config\n"
    "[dataset]\n"
    "kind = blobs\n"
    "classes = 4\n"
    "per_class = 50\n"
    "dim = 4\n"
    "confusability = 0.4\n"
    "seed = 3\n"
    "test_fraction = 0.25\n"
    "split_seed = 5\n"
    "[model]\n"
    "kind = mlp\n"
    "hidden = 16\n"
    "init_seed = 7\n"
    "[train]\n"
    "epochs = 12\n"
    "batch_size = 32\n"
    "lr = 0.003\n"
    "schedule = constant\n"
    "shuffle_seed = 9\n";

} // namespace

TEST_CASE("cli: full pipeline runs and produces the documented artifacts") {
    TempDir tmp;
    write_text_file(tmp.file("config.ini"), kPipelineConfig);

    const std::string clean_dir = tmp.file("clean");
    REQUIRE(run_cli("train-clean --config " + tmp.file("config.ini") + " --out " +
                    clean_dir) == 0);
    CHECK(fs::exists(clean_dir + "/snapshots.csv"));
    CHECK(fs::exists(clean_dir + "/pred_1.csv"));
    CHECK(fs::exists(clean_dir + "/pred_12.csv"));
    CHECK(fs::exists(clean_dir + "/train.csv"));
    CHECK(fs::exists(clean_dir + "/test.csv"));
    CHECK(fs::exists(clean_dir + "/manifest.txt"));
    CHECK(fs::exists(clean_dir + "/config.txt"));

    const std::string pseudo_dir = tmp.file("pseudo");
    REQUIRE(run_cli("make-noise pseudo --snapshots " + clean_dir +
                    " --tau 0.2 --tolerance 0.35 --out " + pseudo_dir) == 0);
    CHECK(fs::exists(pseudo_dir + "/noisy.csv"));
    CHECK(fs::exists(pseudo_dir + "/transition.csv"));
    CHECK(fs::exists(pseudo_dir + "/stats.csv"));

    const std::string rand_dir = tmp.file("randomized");
    REQUIRE(run_cli("make-noise randomized --dataset " + clean_dir +
                    "/train.csv --matrix " + pseudo_dir +
                    "/transition.csv --seed 11 --out " + rand_dir) == 0);

    // matched pair: the randomized dataset re-estimates to the same matrix
    const auto pseudo_t = load_transition(pseudo_dir + "/transition.csv");
    const auto rand_t = load_transition(rand_dir + "/transition.csv");
    REQUIRE(pseudo_t.classes() == rand_t.classes());
    double min_count = 1e18;
    for (std::size_t count : pseudo_t.class_counts) {
        min_count = std::min(min_count, static_cast<double>(count));
    }
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(std::abs(pseudo_t.n_ij(i, j) - rand_t.n_ij(i, j)) <=
                  1.0 / min_count + 1e-12);
        }
    }

    const std::string run_a = tmp.file("run_pseudo");
    const std::string run_b = tmp.file("run_rand");
    REQUIRE(run_cli("train-noisy --config " + tmp.file("config.ini") +
                    " --noisy " + pseudo_dir + "/noisy.csv --test " + clean_dir +
                    "/test.csv --out " + run_a) == 0);
    REQUIRE(run_cli("train-noisy --config " + tmp.file("config.ini") +
                    " --noisy " + rand_dir + "/noisy.csv --test " + clean_dir +
                    "/test.csv --out " + run_b) == 0);
    CHECK(fs::exists(run_a + "/metrics.csv"));

    const std::string report_dir = tmp.file("report");
    REQUIRE(run_cli("report --out " + report_dir + " " + run_a + " " + run_b) ==
            0);
    CHECK(fs::exists(report_dir + "/summary.csv"));
    CHECK(fs::exists(report_dir + "/accuracy.svg"));
    CHECK(fs::exists(report_dir + "/label_recall.svg"));

    const std::string summary = read_text_file(report_dir + "/summary.csv");
    CHECK(split(summary, '\n').size() == 4); // header + 2 rows + trailing
    CHECK(summary.find("pseudo") != std::string::npos);
    CHECK(summary.find("randomized") != std::string::npos);
    CHECK(summary.find("standard") != std::string::npos);

    // analyze prints the stats of any persisted dataset
    const std::string analyze_out = tmp.file("analyze.txt");
    REQUIRE(run_cli("analyze --dataset " + pseudo_dir + "/noisy.csv",
                    analyze_out) == 0);
    const std::string text = read_text_file(analyze_out);
    CHECK(text.find("tau = ") != std::string::npos);
    CHECK(text.find("alpha = ") != std::string::npos);
    CHECK(text.find("N_ij:") != std::string::npos);

    // a co-teaching run reports its method name in the summary
    write_text_file(tmp.file("config_ct.ini"),
                    std::string(kPipelineConfig) + "method = coteaching\n");
    const std::string run_c = tmp.file("run_ct");
    REQUIRE(run_cli("train-noisy --config " + tmp.file("config_ct.ini") +
                    " --noisy " + pseudo_dir + "/noisy.csv --test " + clean_dir +
                    "/test.csv --out " + run_c) == 0);
    const std::string report2 = tmp.file("report2");
    REQUIRE(run_cli("report --out " + report2 + " " + run_a + " " + run_c) == 0);
    const std::string summary2 = read_text_file(report2 + "/summary.csv");
    CHECK(summary2.find("coteaching,pseudo") != std::string::npos);
}

TEST_CASE("cli: numeric divergence exits 3") {
    TempDir tmp;
    LabeledDataset poison;
    poison.features = Matrix(8, 2, 1e308);
    poison.true_labels = {0, 1, 0, 1, 0, 1, 0, 1};
    poison.observed_labels = poison.true_labels;
    poison.classes = 2;
    save_csv(poison, tmp.file("poison.csv"));
    write_text_file(tmp.file("config.ini"),
                    "[dataset]\nkind = csv\npath = " + tmp.file("poison.csv") +
                        "\ntest_fraction = 0.25\n[train]\nepochs = 1\n");
    const std::string err = tmp.file("err.txt");
    CHECK(run_cli("train-clean --config " + tmp.file("config.ini") + " --out " +
                      tmp.file("out"),
                  err) == 3);
    CHECK(read_text_file(err).find("epoch 1") != std::string::npos);
}

TEST_CASE("cli: missing epochs key exits 2 and names the key") {
    TempDir tmp;
    write_text_file(tmp.file("config.ini"),
                    "[dataset]\nkind = blobs\nper_class = 10\n");
    const std::string err = tmp.file("err.txt");
    CHECK(run_cli("train-clean --config " + tmp.file("config.ini") + " --out " +
                      tmp.file("out"),
                  err) == 2);
    CHECK(read_text_file(err).find("train.epochs") != std::string::npos);

    // manifest is written even on failure
    CHECK(fs::exists(tmp.file("out") + "/manifest.txt"));
    CHECK(read_text_file(tmp.file("out") + "/manifest.txt")
              .find("status = error") != std::string::npos);
}

TEST_CASE("cli: unknown config keys are hard errors") {
    TempDir tmp;
    write_text_file(tmp.file("config.ini"),
                    "[train]\nepochs = 2\nepochz = 3\n");
    const std::string err = tmp.file("err.txt");
    CHECK(run_cli("train-clean --config " + tmp.file("config.ini") + " --out " +
                      tmp.file("out"),
                  err) == 2);
    CHECK(read_text_file(err).find("epochz") != std::string::npos);
}

TEST_CASE("cli: rerun with the same config is byte-identical") {
    TempDir tmp;
    write_text_file(tmp.file("config.ini"), kPipelineConfig);
    const std::string a = tmp.file("a");
    const std::string b = tmp.file("b");
    REQUIRE(run_cli("train-clean --config " + tmp.file("config.ini") + " --out " +
                    a) == 0);
    REQUIRE(run_cli("train-clean --config " + tmp.file("config.ini") + " --out " +
                    b) == 0);
    for (const char* name : {"train.csv", "test.csv", "snapshots.csv", "pred_1.csv",
                             "pred_7.csv", "pred_12.csv"}) {
        CHECK(read_text_file(a + "/" + name) == read_text_file(b + "/" + name));
    }
}

TEST_CASE("cli: symmetric noise with tau 0 returns the input labels") {
    TempDir tmp;
    const auto data = gen_confusable_blobs(3, 20, 3, 0.2, 8);
    save_csv(data, tmp.file("clean.csv"));
    const std::string out = tmp.file("sym");
    REQUIRE(run_cli("make-noise symmetric --dataset " + tmp.file("clean.csv") +
                    " --tau 0 --out " + out) == 0);
    const auto noisy = load_noisy(out + "/noisy.csv");
    CHECK(noisy.observed_labels == data.true_labels);
    CHECK(noisy.features == data.features);
    CHECK(noisy.noisy_count() == 0);
}

TEST_CASE("cli: pseudo generation honors the default tolerance window") {
    TempDir tmp;
    const std::string dir = tmp.file("handmade");
    fs::create_directories(dir);

    const auto clean = gen_confusable_blobs(4, 250, 4, 0.3, 19);
    save_csv(clean, dir + "/train.csv");

    // three snapshots at accuracies 0.7 / 0.8 / 0.9
    std::vector<PredictionSnapshot> snaps(3);
    for (std::size_t e = 0; e < 3; ++e) {
        snaps[e].epoch = e + 1;
        snaps[e].predictions = clean.true_labels;
        const std::size_t wrong = 300 - 100 * e;
        for (std::size_t i = 0; i < wrong; ++i) {
            snaps[e].predictions[i] = (clean.true_labels[i] + 1) % 4;
        }
        snaps[e].train_accuracy =
            static_cast<double>(1000 - wrong) / 1000.0;
    }
    save_snapshots(snaps, dir);

    const std::string out = tmp.file("pseudo");
    REQUIRE(run_cli("make-noise pseudo --snapshots " + dir +
                    " --tau 0.2 --out " + out) == 0);
    const std::string stats = read_text_file(out + "/stats.csv");
    const auto lines = split(stats, '\n');
    REQUIRE(lines.size() >= 2);
    const double tau = parse_double(split(lines[1], ',')[0], "stats");
    CHECK(tau >= 0.18);
    CHECK(tau <= 0.22);
}

TEST_CASE("cli: unreachable snapshot accuracy exits 4") {
    TempDir tmp;
    write_text_file(tmp.file("config.ini"), kPipelineConfig);
    const std::string clean_dir = tmp.file("clean");
    REQUIRE(run_cli("train-clean --config " + tmp.file("config.ini") + " --out " +
                    clean_dir) == 0);
    const std::string err = tmp.file("err.txt");
    CHECK(run_cli("make-noise pseudo --snapshots " + clean_dir +
                      " --tau 0.95 --tolerance 0.01 --out " + tmp.file("x"),
                  err) == 4);
    CHECK(read_text_file(err).find("nearest achievable") != std::string::npos);
}

TEST_CASE("cli: report on an incomplete run dir exits 5") {
    TempDir tmp;
    fs::create_directories(tmp.file("empty_run"));
    CHECK(run_cli("report --out " + tmp.file("report") + " " +
                  tmp.file("empty_run")) == 5);
}

TEST_CASE("cli: bad flags exit 2") {
    TempDir tmp;
    CHECK(run_cli("train-clean --out " + tmp.file("o")) == 2); // missing --config
    CHECK(run_cli("make-noise sideways --out " + tmp.file("p") +
                  " --dataset nowhere.csv") == 2);
}
