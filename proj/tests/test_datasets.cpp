#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "noiselab/dataset.hpp"
#include "noiselab/errors.hpp"
#include "noiselab/loss.hpp"
#include "noiselab/model.hpp"
#include "noiselab/optim.hpp"
#include "noiselab/util.hpp"
#include "test_util.hpp"

using namespace noiselab;
using testutil::TempDir;

namespace {

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void push_be_u32(std::vector<unsigned char>& bytes, std::uint32_t value) {
    bytes.push_back(static_cast<unsigned char>(value >> 24));
    bytes.push_back(static_cast<unsigned char>(value >> 16));
    bytes.push_back(static_cast<unsigned char>(value >> 8));
    bytes.push_back(static_cast<unsigned char>(value));
}

} // namespace

TEST_CASE("blobs: separable data is fit by a linear classifier") {
    const auto data = gen_confusable_blobs(4, 50, 4, 0.0, 3);
    ModelSpec spec;
    spec.input_dim = 4;
    spec.hidden = {};
    spec.classes = 4;
    spec.init_seed = 1;
    Model model = Model::init(spec);
    AdamState opt = AdamState::init(model.param_count(), {0.05, 0.9, 0.999, 1e-8});
    std::vector<double> grads(model.param_count());
    Model::Cache cache;
    for (int step = 0; step < 300; ++step) {
        const Matrix logits = model.forward_cached(data.features, cache);
        const auto lg = softmax_cross_entropy(logits, data.true_labels);
        model.backward(cache, lg.dlogits, grads);
        adam_step(model.params(), grads, opt, 1.0);
    }
    const auto preds = model.predict(data.features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        correct += preds[i] == data.true_labels[i];
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(preds.size()) >= 0.99);
}

TEST_CASE("blobs: same seed twice gives bit-identical datasets") {
    const auto a = gen_confusable_blobs(4, 25, 6, 0.5, 42);
    const auto b = gen_confusable_blobs(4, 25, 6, 0.5, 42);
    CHECK(a.features == b.features);
    CHECK(a.true_labels == b.true_labels);
    CHECK(a.observed_labels == b.observed_labels);

    const auto c = gen_confusable_blobs(4, 25, 6, 0.5, 43);
    CHECK_FALSE(a.features == c.features);
}

TEST_CASE("blobs: class balance and sizes are exact") {
    const auto data = gen_confusable_blobs(4, 250, 8, 0.5, 7);
    CHECK(data.size() == 1000);
    std::vector<std::size_t> counts(4, 0);
    for (int label : data.true_labels) ++counts[static_cast<std::size_t>(label)];
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(counts[c] == 250);
    }
    CHECK(data.provenance == Provenance::Clean);
    CHECK(data.noisy_count() == 0);
}

TEST_CASE("blobs: parameter validation") {
    CHECK_THROWS_AS(gen_confusable_blobs(1, 10, 4, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(gen_confusable_blobs(4, 10, 1, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(gen_confusable_blobs(4, 10, 4, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(gen_confusable_blobs(4, 0, 4, 0.5, 1), ConfigError);
}

TEST_CASE("idx: loads byte images with shape preserved") {
    TempDir tmp;
    const std::size_t n = 10, h = 28, w = 28;
    std::vector<unsigned char> images;
    push_be_u32(images, 0x00000803);
    push_be_u32(images, n);
    push_be_u32(images, h);
    push_be_u32(images, w);
    for (std::size_t i = 0; i < n * h * w; ++i) {
        images.push_back(static_cast<unsigned char>(i % 256));
    }
    std::vector<unsigned char> labels;
    push_be_u32(labels, 0x00000801);
    push_be_u32(labels, n);
    for (std::size_t i = 0; i < n; ++i) {
        labels.push_back(static_cast<unsigned char>(i % 4));
    }
    write_bytes(tmp.file("img.idx"), images);
    write_bytes(tmp.file("lab.idx"), labels);

    const auto data = load_idx(tmp.file("img.idx"), tmp.file("lab.idx"));
    CHECK(data.size() == n);
    REQUIRE(data.image_shape.has_value());
    CHECK(data.image_shape->h == h);
    CHECK(data.image_shape->w == w);
    CHECK(data.image_shape->c == 1);
    CHECK(data.dim() == h * w);
    CHECK(data.classes == 4);
    // byte 255 -> 1.0, byte 0 -> 0.0
    CHECK(data.features(0, 0) == 0.0);
    CHECK(data.features(0, 255) == 1.0);
}

TEST_CASE("idx: malformed headers are ingestion errors") {
    TempDir tmp;
    std::vector<unsigned char> bad;
    push_be_u32(bad, 0x00000777);
    push_be_u32(bad, 1);
    push_be_u32(bad, 2);
    push_be_u32(bad, 2);
    bad.resize(bad.size() + 4, 0);
    std::vector<unsigned char> labels;
    push_be_u32(labels, 0x00000801);
    push_be_u32(labels, 1);
    labels.push_back(0);
    write_bytes(tmp.file("img.idx"), bad);
    write_bytes(tmp.file("lab.idx"), labels);
    CHECK_THROWS_AS(load_idx(tmp.file("img.idx"), tmp.file("lab.idx")), IngestError);

    // truncated image payload
    std::vector<unsigned char> trunc;
    push_be_u32(trunc, 0x00000803);
    push_be_u32(trunc, 2);
    push_be_u32(trunc, 4);
    push_be_u32(trunc, 4);
    trunc.resize(trunc.size() + 10, 0); // payload should be 32 bytes
    write_bytes(tmp.file("trunc.idx"), trunc);
    CHECK_THROWS_AS(load_idx(tmp.file("trunc.idx"), tmp.file("lab.idx")),
                    IngestError);
}

TEST_CASE("csv: save then load is lossless") {
    TempDir tmp;
    auto data = gen_confusable_blobs(4, 30, 5, 0.3, 11);
    // flip a few labels so both vectors are exercised
    data.observed_labels[3] = (data.true_labels[3] + 1) % 4;
    data.observed_labels[17] = (data.true_labels[17] + 2) % 4;
    data.provenance = Provenance::Pseudo;

    save_csv(data, tmp.file("data.csv"));
    const auto loaded = load_csv(tmp.file("data.csv"));
    CHECK(loaded.features == data.features);
    CHECK(loaded.true_labels == data.true_labels);
    CHECK(loaded.observed_labels == data.observed_labels);
    CHECK(loaded.classes == data.classes);
    CHECK(loaded.provenance == Provenance::Pseudo);
}

TEST_CASE("csv: label >= C is an ingestion error with line position") {
    TempDir tmp;
    const std::string text =
        "# noiselab v1 provenance=clean C=2\n"
        "index,true_label,observed_label,f0\n"
        "0,0,0,0.5\n"
        "1,2,2,0.5\n";
    write_text_file(tmp.file("bad.csv"), text);
    try {
        load_csv(tmp.file("bad.csv"));
        FAIL("expected IngestError");
    } catch (const IngestError& err) {
        CHECK(std::string(err.what()).find("line 4") != std::string::npos);
    }
}

TEST_CASE("csv: truncation and malformed rows never pass silently") {
    TempDir tmp;
    const std::string gap =
        "# noiselab v1 provenance=clean C=2\n"
        "index,true_label,observed_label,f0\n"
        "0,0,0,0.5\n"
        "2,1,1,0.5\n";
    write_text_file(tmp.file("gap.csv"), gap);
    CHECK_THROWS_AS(load_csv(tmp.file("gap.csv")), IngestError);

    const std::string short_row =
        "# noiselab v1 provenance=clean C=2\n"
        "index,true_label,observed_label,f0,f1\n"
        "0,0,0,0.5\n";
    write_text_file(tmp.file("short.csv"), short_row);
    CHECK_THROWS_AS(load_csv(tmp.file("short.csv")), IngestError);

    write_text_file(tmp.file("noheader.csv"), "index,true_label\n0,1\n");
    CHECK_THROWS_AS(load_csv(tmp.file("noheader.csv")), IngestError);
}

TEST_CASE("csv: image shape round trips through the comment line") {
    TempDir tmp;
    LabeledDataset data;
    data.features = Matrix(3, 16, 0.25);
    data.true_labels = {0, 1, 1};
    data.observed_labels = {0, 1, 1};
    data.classes = 2;
    data.image_shape = ImageShape{4, 4, 1};
    save_csv(data, tmp.file("img.csv"));
    const auto loaded = load_csv(tmp.file("img.csv"));
    REQUIRE(loaded.image_shape.has_value());
    CHECK(loaded.image_shape->h == 4);
    CHECK(loaded.image_shape->w == 4);
    CHECK(loaded.image_shape->c == 1);
}

TEST_CASE("split: exact sizes, determinism, exhaustive partition") {
    const auto data = gen_confusable_blobs(4, 250, 4, 0.2, 5);
    SplitSpec spec;
    spec.test_fraction = 0.2;
    spec.shuffle_seed = 9;
    const auto [train, test] = split(data, spec);
    CHECK(train.size() == 800);
    CHECK(test.size() == 200);

    const auto [train2, test2] = split(data, spec);
    CHECK(train.features == train2.features);
    CHECK(test.features == test2.features);

    // union must cover every original row exactly once; real-valued rows are
    // unique with probability 1, so the feature row is a safe key
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < train.size(); ++i) {
        auto r = train.features.row(i);
        rows.emplace_back(r.begin(), r.end());
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        auto r = test.features.row(i);
        rows.emplace_back(r.begin(), r.end());
    }
    std::sort(rows.begin(), rows.end());
    CHECK(rows.size() == data.size());
    CHECK(std::adjacent_find(rows.begin(), rows.end()) == rows.end());

    std::vector<std::vector<double>> original;
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto r = data.features.row(i);
        original.emplace_back(r.begin(), r.end());
    }
    std::sort(original.begin(), original.end());
    CHECK(rows == original);
}

TEST_CASE("split: rejects bad fractions and empty datasets") {
    const auto data = gen_confusable_blobs(2, 5, 2, 0.0, 1);
    CHECK_THROWS_AS(split(data, SplitSpec{0.0, 1}), ConfigError);
    CHECK_THROWS_AS(split(data, SplitSpec{1.0, 1}), ConfigError);
    LabeledDataset empty;
    CHECK_THROWS_AS(split(empty, SplitSpec{0.5, 1}), ConfigError);
}

TEST_CASE("save_noisy: clean dataset loads back with zero noisy examples") {
    TempDir tmp;
    const auto data = gen_confusable_blobs(2, 20, 3, 0.1, 13);
    save_noisy(data, tmp.file("clean.csv"));
    const auto loaded = load_noisy(tmp.file("clean.csv"));
    CHECK(loaded.noisy_count() == 0);
    CHECK(loaded.provenance == Provenance::Clean);
}

TEST_CASE("save_noisy: noise rate is recomputable from the file alone") {
    TempDir tmp;
    auto data = gen_confusable_blobs(4, 250, 4, 0.2, 17);
    // flip exactly 200 labels
    for (std::size_t i = 0; i < 200; ++i) {
        data.observed_labels[i * 5] = (data.true_labels[i * 5] + 1) % 4;
    }
    data.provenance = Provenance::Pseudo;
    save_noisy(data, tmp.file("noisy.csv"));
    const auto loaded = load_noisy(tmp.file("noisy.csv"));
    CHECK(loaded.noisy_count() == 200);
    CHECK(loaded.noise_rate() == 0.2);
}

TEST_CASE("dataset validation catches inconsistent clean provenance") {
    auto data = gen_confusable_blobs(2, 5, 2, 0.0, 1);
    data.observed_labels[0] = 1 - data.observed_labels[0];
    CHECK_THROWS_AS(data.validate(), ConfigError); // clean but observed != true
    data.provenance = Provenance::Symmetric;
    CHECK_NOTHROW(data.validate());
}
