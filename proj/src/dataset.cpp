#include "noiselab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "noiselab/errors.hpp"
#include "noiselab/rng.hpp"
#include "noiselab/util.hpp"

namespace noiselab {

Provenance provenance_from_string(const std::string& tag) {
    if (tag == "clean") return Provenance::Clean;
    if (tag == "symmetric") return Provenance::Symmetric;
    if (tag == "asymmetric") return Provenance::Asymmetric;
    if (tag == "randomized") return Provenance::Randomized;
    if (tag == "pseudo") return Provenance::Pseudo;
    throw IngestError("unknown provenance tag: " + tag);
}

std::string to_string(Provenance provenance) {
    switch (provenance) {
    case Provenance::Clean: return "clean";
    case Provenance::Symmetric: return "symmetric";
    case Provenance::Asymmetric: return "asymmetric";
    case Provenance::Randomized: return "randomized";
    case Provenance::Pseudo: return "pseudo";
    }
    throw ConfigError("invalid provenance value");
}

std::size_t LabeledDataset::noisy_count() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < size(); ++i) {
        if (!is_clean(i)) ++count;
    }
    return count;
}

double LabeledDataset::noise_rate() const {
    if (size() == 0) return 0.0;
    return static_cast<double>(noisy_count()) / static_cast<double>(size());
}

void LabeledDataset::validate() const {
    if (classes < 2) {
        throw ConfigError("dataset requires at least 2 classes");
    }
    if (true_labels.size() != observed_labels.size() ||
        true_labels.size() != features.rows()) {
        throw ConfigError("dataset label/feature row counts disagree");
    }
    for (std::size_t i = 0; i < size(); ++i) {
        const bool ok_true =
            true_labels[i] >= 0 && static_cast<std::size_t>(true_labels[i]) < classes;
        const bool ok_obs = observed_labels[i] >= 0 &&
                            static_cast<std::size_t>(observed_labels[i]) < classes;
        if (!ok_true || !ok_obs) {
            throw ConfigError("dataset label out of range at example " +
                              format_u64(i));
        }
        if (provenance == Provenance::Clean && observed_labels[i] != true_labels[i]) {
            throw ConfigError("clean dataset has observed != true at example " +
                              format_u64(i));
        }
    }
    if (image_shape) {
        if (image_shape->h * image_shape->w * image_shape->c != features.cols()) {
            throw ConfigError("image shape does not match feature width");
        }
    }
}

LabeledDataset gen_confusable_blobs(std::size_t classes, std::size_t n_per_class,
                                    std::size_t dim, double confusability,
                                    std::uint64_t seed) {
    if (classes < 2) {
        throw ConfigError("gen_confusable_blobs requires at least 2 classes");
    }
    if (dim < 2) {
        throw ConfigError("gen_confusable_blobs requires dim >= 2");
    }
    if (n_per_class < 1) {
        throw ConfigError("gen_confusable_blobs requires n_per_class >= 1");
    }
    if (confusability < 0.0 || confusability >= 1.0) {
        throw ConfigError("confusability must lie in [0, 1)");
    }

    // Pair centers sit on a circle of radius kRadius in the first two
    // dimensions; the two classes of a pair are offset along the tangent by
    // +-kPairGap*(1-confusability)/2, so paired clusters overlap more as
    // confusability grows. The radius keeps distinct pairs separable yet
    // close enough that a partially trained network also confuses across
    // pairs; with a large radius its early mistakes collapse onto the pair
    // partner and random partner-flips look feature-dependent.
    constexpr double kRadius = 5.5;
    constexpr double kPairGap = 8.0;
    const std::size_t pairs = (classes + 1) / 2;
    const double half_gap = 0.5 * kPairGap * (1.0 - confusability);

    const std::size_t n = classes * n_per_class;
    LabeledDataset ds;
    ds.features = Matrix(n, dim);
    ds.true_labels.resize(n);
    ds.observed_labels.resize(n);
    ds.classes = classes;
    ds.provenance = Provenance::Clean;

    Rng rng(seed);
    std::size_t row = 0;
    for (std::size_t cls = 0; cls < classes; ++cls) {
        const std::size_t pair = cls / 2;
        const double theta =
            2.0 * std::numbers::pi * static_cast<double>(pair) /
            static_cast<double>(pairs);
        const double side = (cls % 2 == 0) ? -1.0 : 1.0;
        const bool lone = (cls % 2 == 0) && (cls + 1 == classes);
        double mean0 = kRadius * std::cos(theta);
        double mean1 = kRadius * std::sin(theta);
        if (!lone) {
            mean0 += side * half_gap * -std::sin(theta);
            mean1 += side * half_gap * std::cos(theta);
        }
        for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
            auto feat = ds.features.row(row);
            feat[0] = mean0 + rng.normal();
            feat[1] = mean1 + rng.normal();
            for (std::size_t k = 2; k < dim; ++k) {
                feat[k] = rng.normal();
            }
            ds.true_labels[row] = static_cast<int>(cls);
            ds.observed_labels[row] = static_cast<int>(cls);
        }
    }
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset,
                                                const SplitSpec& spec) {
    if (dataset.size() == 0) {
        throw ConfigError("cannot split an empty dataset");
    }
    if (spec.test_fraction <= 0.0 || spec.test_fraction >= 1.0) {
        throw ConfigError("test fraction must lie in (0, 1)");
    }
    const std::size_t n = dataset.size();
    const std::size_t n_test = static_cast<std::size_t>(
        std::llround(spec.test_fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(spec.shuffle_seed);
    rng.shuffle(order);

    std::vector<std::size_t> test_idx(order.begin(), order.begin() + n_test);
    std::vector<std::size_t> train_idx(order.begin() + n_test, order.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    auto take = [&dataset](const std::vector<std::size_t>& indices) {
        LabeledDataset out;
        out.features = Matrix(indices.size(), dataset.dim());
        out.true_labels.resize(indices.size());
        out.observed_labels.resize(indices.size());
        out.classes = dataset.classes;
        out.provenance = dataset.provenance;
        out.image_shape = dataset.image_shape;
        for (std::size_t i = 0; i < indices.size(); ++i) {
            auto src = dataset.features.row(indices[i]);
            auto dst = out.features.row(i);
            std::copy(src.begin(), src.end(), dst.begin());
            out.true_labels[i] = dataset.true_labels[indices[i]];
            out.observed_labels[i] = dataset.observed_labels[indices[i]];
        }
        return out;
    };
    return {take(train_idx), take(test_idx)};
}

void save_csv(const LabeledDataset& dataset, const std::string& path) {
    dataset.validate();
    std::string out;
    out.reserve(dataset.size() * (16 + 24 * dataset.dim()));
    out += "# noiselab v1 provenance=" + to_string(dataset.provenance) +
           " C=" + format_u64(dataset.classes);
    if (dataset.image_shape) {
        out += " shape=" + format_u64(dataset.image_shape->h) + "x" +
               format_u64(dataset.image_shape->w) + "x" +
               format_u64(dataset.image_shape->c);
    }
    out += "\n";
    out += "index,true_label,observed_label";
    for (std::size_t k = 0; k < dataset.dim(); ++k) {
        out += ",f" + format_u64(k);
    }
    out += "\n";
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out += format_u64(i);
        out += ',';
        out += format_u64(static_cast<std::uint64_t>(dataset.true_labels[i]));
        out += ',';
        out += format_u64(static_cast<std::uint64_t>(dataset.observed_labels[i]));
        auto feat = dataset.features.row(i);
        for (double v : feat) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    write_text_file(path, out);
}

LabeledDataset load_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;

    if (!std::getline(in, line)) {
        throw IngestError(path + ": empty file");
    }
    LabeledDataset ds;
    {
        auto header = trim(line);
        const std::string_view prefix = "# noiselab v1 ";
        if (!header.starts_with(prefix)) {
            throw IngestError(path + ": line 1: missing noiselab v1 comment line");
        }
        bool saw_provenance = false, saw_classes = false;
        for (auto token : split(header.substr(prefix.size()), ' ')) {
            token = trim(token);
            if (token.empty()) continue;
            if (token.starts_with("provenance=")) {
                ds.provenance =
                    provenance_from_string(std::string(token.substr(11)));
                saw_provenance = true;
            } else if (token.starts_with("C=")) {
                ds.classes = parse_u64(token.substr(2), path + ": line 1");
                saw_classes = true;
            } else if (token.starts_with("shape=")) {
                const auto dims = split(token.substr(6), 'x');
                if (dims.size() != 3) {
                    throw IngestError(path + ": line 1: malformed shape token");
                }
                ImageShape shape;
                shape.h = parse_u64(dims[0], path + ": line 1");
                shape.w = parse_u64(dims[1], path + ": line 1");
                shape.c = parse_u64(dims[2], path + ": line 1");
                ds.image_shape = shape;
            } else {
                throw IngestError(path + ": line 1: unknown token '" +
                                  std::string(token) + "'");
            }
        }
        if (!saw_provenance || !saw_classes) {
            throw IngestError(path + ": line 1: comment must carry provenance and C");
        }
    }

    if (!std::getline(in, line)) {
        throw IngestError(path + ": line 2: missing column header");
    }
    const auto cols = split(trim(line), ',');
    if (cols.size() < 4 || cols[0] != "index" || cols[1] != "true_label" ||
        cols[2] != "observed_label") {
        throw IngestError(path + ": line 2: malformed column header");
    }
    const std::size_t dim = cols.size() - 3;
    for (std::size_t k = 0; k < dim; ++k) {
        if (cols[3 + k] != "f" + format_u64(k)) {
            throw IngestError(path + ": line 2: expected column f" + format_u64(k));
        }
    }

    std::vector<double> values;
    std::size_t row = 0;
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty()) continue;
        const std::string where = path + ": line " + format_u64(line_no);
        const auto fields = split(t, ',');
        if (fields.size() != 3 + dim) {
            throw IngestError(where + ": expected " + format_u64(3 + dim) +
                              " fields, got " + format_u64(fields.size()));
        }
        const auto idx = parse_u64(fields[0], where);
        if (idx != row) {
            throw IngestError(where + ": index " + format_u64(idx) +
                              " out of sequence (expected " + format_u64(row) + ")");
        }
        const auto true_label = parse_int(fields[1], where);
        const auto obs_label = parse_int(fields[2], where);
        if (true_label < 0 || static_cast<std::size_t>(true_label) >= ds.classes ||
            obs_label < 0 || static_cast<std::size_t>(obs_label) >= ds.classes) {
            throw IngestError(where + ": label out of range for C=" +
                              format_u64(ds.classes));
        }
        ds.true_labels.push_back(static_cast<int>(true_label));
        ds.observed_labels.push_back(static_cast<int>(obs_label));
        for (std::size_t k = 0; k < dim; ++k) {
            values.push_back(parse_double(fields[3 + k], where));
        }
        ++row;
    }
    if (row == 0) {
        throw IngestError(path + ": no data rows");
    }
    ds.features = Matrix(row, dim);
    std::copy(values.begin(), values.end(), ds.features.data());
    ds.validate();
    return ds;
}

void save_noisy(const LabeledDataset& dataset, const std::string& path) {
    save_csv(dataset, path);
}

LabeledDataset load_noisy(const std::string& path) {
    return load_csv(path);
}

namespace {

std::uint32_t read_be_u32(const std::string& bytes, std::size_t offset,
                          const std::string& path) {
    if (offset + 4 > bytes.size()) {
        throw IngestError(path + ": truncated header at byte " +
                          format_u64(offset));
    }
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 3]));
}

} // namespace

LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path,
                        std::size_t class_count) {
    const std::string img = read_text_file(images_path);
    const std::string lab = read_text_file(labels_path);

    if (read_be_u32(img, 0, images_path) != 0x00000803u) {
        throw IngestError(images_path + ": bad IDX image magic at byte 0");
    }
    const std::size_t n = read_be_u32(img, 4, images_path);
    const std::size_t h = read_be_u32(img, 8, images_path);
    const std::size_t w = read_be_u32(img, 12, images_path);
    if (img.size() != 16 + n * h * w) {
        throw IngestError(images_path + ": expected " +
                          format_u64(16 + n * h * w) + " bytes, got " +
                          format_u64(img.size()));
    }

    if (read_be_u32(lab, 0, labels_path) != 0x00000801u) {
        throw IngestError(labels_path + ": bad IDX label magic at byte 0");
    }
    const std::size_t n_labels = read_be_u32(lab, 4, labels_path);
    if (n_labels != n) {
        throw IngestError(labels_path + ": label count " + format_u64(n_labels) +
                          " does not match image count " + format_u64(n));
    }
    if (lab.size() != 8 + n) {
        throw IngestError(labels_path + ": expected " + format_u64(8 + n) +
                          " bytes, got " + format_u64(lab.size()));
    }
    if (n == 0) {
        throw IngestError(images_path + ": empty IDX dataset");
    }

    LabeledDataset ds;
    ds.image_shape = ImageShape{h, w, 1};
    ds.features = Matrix(n, h * w);
    ds.true_labels.resize(n);
    ds.observed_labels.resize(n);
    ds.provenance = Provenance::Clean;

    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<unsigned char>(lab[8 + i]);
        ds.true_labels[i] = label;
        ds.observed_labels[i] = label;
        max_label = std::max(max_label, label);
        auto feat = ds.features.row(i);
        for (std::size_t p = 0; p < h * w; ++p) {
            feat[p] =
                static_cast<double>(static_cast<unsigned char>(img[16 + i * h * w + p])) /
                255.0;
        }
    }
    ds.classes = class_count == 0
                     ? static_cast<std::size_t>(max_label) + 1
                     : class_count;
    if (ds.classes < 2) ds.classes = 2;
    for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(ds.true_labels[i]) >= ds.classes) {
            throw IngestError(labels_path + ": label " +
                              format_u64(static_cast<std::uint64_t>(ds.true_labels[i])) +
                              " at byte " + format_u64(8 + i) + " exceeds C=" +
                              format_u64(ds.classes));
        }
    }
    ds.validate();
    return ds;
}

} // namespace noiselab
