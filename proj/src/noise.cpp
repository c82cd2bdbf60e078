#include "noiselab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "noiselab/errors.hpp"
#include "noiselab/rng.hpp"
#include "noiselab/util.hpp"

namespace fs = std::filesystem;

namespace noiselab {

namespace {

double population_stddev(std::span<const double> values) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return std::sqrt(var / n);
}

void check_labels(std::span<const int> labels, std::size_t classes,
                  const char* what) {
    for (int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw ConfigError(std::string(what) + " label out of range");
        }
    }
}

// Picks `count` distinct positions from [0, n) by partial Fisher-Yates.
std::vector<std::size_t> pick_without_replacement(std::size_t n, std::size_t count,
                                                  Rng& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
        std::swap(order[i], order[i + rng.index(n - i)]);
    }
    order.resize(count);
    return order;
}

std::size_t exact_count(double tau, std::size_t n) {
    return static_cast<std::size_t>(std::llround(tau * static_cast<double>(n)));
}

} // namespace

void TransitionMatrix::validate() const {
    if (n_ij.rows() != n_ij.cols() || n_ij.rows() < 2) {
        throw ConfigError("transition matrix must be square with C >= 2");
    }
    if (class_counts.size() != n_ij.rows()) {
        throw ConfigError("transition matrix class_counts size mismatch");
    }
    for (std::size_t i = 0; i < n_ij.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n_ij.cols(); ++j) {
            const double v = n_ij(i, j);
            if (v < 0.0 || v > 1.0) {
                throw ConfigError("transition entries must lie in [0, 1]");
            }
            sum += v;
        }
        if (row_defined(i) && std::abs(sum - 1.0) > 1e-9) {
            throw ConfigError("transition row " + format_u64(i) +
                              " sums to " + format_double(sum) + ", not 1");
        }
    }
}

TransitionMatrix estimate_transition(std::span<const int> true_labels,
                                     std::span<const int> observed_labels,
                                     std::size_t classes) {
    if (true_labels.size() != observed_labels.size()) {
        throw ConfigError("estimate_transition: label vector length mismatch");
    }
    if (classes < 2) {
        throw ConfigError("estimate_transition: C must be >= 2");
    }
    check_labels(true_labels, classes, "true");
    check_labels(observed_labels, classes, "observed");

    TransitionMatrix t;
    t.n_ij = Matrix(classes, classes);
    t.class_counts.assign(classes, 0);
    for (std::size_t k = 0; k < true_labels.size(); ++k) {
        t.n_ij(static_cast<std::size_t>(true_labels[k]),
               static_cast<std::size_t>(observed_labels[k])) += 1.0;
        t.class_counts[static_cast<std::size_t>(true_labels[k])] += 1;
    }
    for (std::size_t i = 0; i < classes; ++i) {
        if (t.class_counts[i] == 0) continue; // undefined row stays all-zero
        for (std::size_t j = 0; j < classes; ++j) {
            t.n_ij(i, j) /= static_cast<double>(t.class_counts[i]);
        }
    }
    return t;
}

NoiseStats alpha_beta(const TransitionMatrix& transition) {
    transition.validate();
    const std::size_t c = transition.classes();

    std::string empty_classes;
    for (std::size_t i = 0; i < c; ++i) {
        if (!transition.row_defined(i)) {
            if (!empty_classes.empty()) empty_classes += ", ";
            empty_classes += format_u64(i);
        }
    }
    if (!empty_classes.empty()) {
        throw StatsError("alpha/beta undefined: empty true classes {" +
                         empty_classes + "}");
    }

    std::vector<double> diagonal(c);
    for (std::size_t i = 0; i < c; ++i) diagonal[i] = transition.n_ij(i, i);

    NoiseStats stats;
    stats.column_sums.assign(c, 0.0);
    for (std::size_t j = 0; j < c; ++j) {
        for (std::size_t i = 0; i < c; ++i) {
            stats.column_sums[j] += transition.n_ij(i, j);
        }
    }
    stats.alpha = population_stddev(diagonal);
    stats.beta = population_stddev(stats.column_sums);

    std::size_t n = 0;
    for (std::size_t count : transition.class_counts) n += count;
    double diag_mass = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        diag_mass += static_cast<double>(transition.class_counts[i]) /
                     static_cast<double>(n) * transition.n_ij(i, i);
    }
    stats.tau = 1.0 - diag_mass;
    return stats;
}

LabeledDataset symmetric_noise(const LabeledDataset& dataset, double tau,
                               std::uint64_t seed) {
    dataset.validate();
    if (tau < 0.0 || tau > 1.0) {
        throw ConfigError("symmetric_noise: tau must lie in [0, 1]");
    }
    LabeledDataset out = dataset;
    out.provenance = Provenance::Symmetric;
    out.observed_labels = dataset.true_labels;

    Rng rng(seed);
    const std::size_t flips = exact_count(tau, dataset.size());
    const auto picked = pick_without_replacement(dataset.size(), flips, rng);
    for (std::size_t idx : picked) {
        const std::size_t truth = static_cast<std::size_t>(out.true_labels[idx]);
        std::size_t other = rng.index(dataset.classes - 1);
        if (other >= truth) ++other;
        out.observed_labels[idx] = static_cast<int>(other);
    }
    return out;
}

LabeledDataset asymmetric_noise(const LabeledDataset& dataset, double tau,
                                std::uint64_t seed) {
    dataset.validate();
    if (tau < 0.0 || tau > 1.0) {
        throw ConfigError("asymmetric_noise: tau must lie in [0, 1]");
    }
    LabeledDataset out = dataset;
    out.provenance = Provenance::Asymmetric;
    out.observed_labels = dataset.true_labels;

    Rng rng(seed);
    for (std::size_t cls = 0; cls < dataset.classes; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (static_cast<std::size_t>(dataset.true_labels[i]) == cls) {
                members.push_back(i);
            }
        }
        const std::size_t flips = exact_count(tau, members.size());
        const auto picked = pick_without_replacement(members.size(), flips, rng);
        const int target = static_cast<int>((cls + 1) % dataset.classes);
        for (std::size_t p : picked) {
            out.observed_labels[members[p]] = target;
        }
    }
    return out;
}

LabeledDataset randomized_noise(const LabeledDataset& dataset,
                                const TransitionMatrix& transition,
                                std::uint64_t seed) {
    dataset.validate();
    transition.validate();
    if (transition.classes() != dataset.classes) {
        throw ConfigError("randomized_noise: transition dimension != dataset C");
    }

    LabeledDataset out = dataset;
    out.provenance = Provenance::Randomized;
    out.observed_labels = dataset.true_labels;

    Rng rng(seed);
    const std::size_t c = dataset.classes;
    for (std::size_t cls = 0; cls < c; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (static_cast<std::size_t>(dataset.true_labels[i]) == cls) {
                members.push_back(i);
            }
        }
        if (members.empty()) continue;
        if (!transition.row_defined(cls)) {
            throw ConfigError("randomized_noise: transition row " +
                              format_u64(cls) +
                              " is undefined but class has examples");
        }
        const std::size_t n_i = members.size();

        // Largest-remainder rounding: exact per-cell counts summing to n_i.
        std::vector<std::size_t> counts(c);
        std::vector<std::pair<double, std::size_t>> remainders(c);
        std::size_t assigned = 0;
        for (std::size_t j = 0; j < c; ++j) {
            const double exact = static_cast<double>(n_i) * transition.n_ij(cls, j);
            const double base = std::floor(exact);
            counts[j] = static_cast<std::size_t>(base);
            remainders[j] = {exact - base, j};
            assigned += counts[j];
        }
        std::sort(remainders.begin(), remainders.end(),
                  [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                  });
        for (std::size_t k = 0; assigned < n_i; ++k, ++assigned) {
            counts[remainders[k].second] += 1;
        }

        rng.shuffle(members);
        std::size_t cursor = 0;
        for (std::size_t j = 0; j < c; ++j) {
            for (std::size_t k = 0; k < counts[j]; ++k, ++cursor) {
                out.observed_labels[members[cursor]] = static_cast<int>(j);
            }
        }
    }
    return out;
}

PredictionSnapshot select_snapshot(
    std::span<const PredictionSnapshot> snapshots, double tau, double tolerance,
    std::optional<std::pair<double, double>> target) {
    if (snapshots.empty()) {
        throw SelectionError("select_snapshot: no snapshots available");
    }
    if (tolerance < 0.0) {
        throw ConfigError("select_snapshot: tolerance must be >= 0");
    }
    const double wanted = 1.0 - tau;

    const PredictionSnapshot* best = nullptr;
    double best_key = std::numeric_limits<double>::infinity();
    double nearest_acc = snapshots[0].train_accuracy;
    double nearest_gap = std::numeric_limits<double>::infinity();

    for (const auto& snap : snapshots) {
        const double gap = std::abs(snap.train_accuracy - wanted);
        if (gap < nearest_gap) {
            nearest_gap = gap;
            nearest_acc = snap.train_accuracy;
        }
        if (gap > tolerance) continue;
        double key;
        if (target) {
            if (!std::isfinite(snap.alpha) || !std::isfinite(snap.beta)) {
                throw ConfigError(
                    "select_snapshot: alpha/beta target given but snapshots "
                    "carry no stats (annotate them first)");
            }
            const double da = snap.alpha - target->first;
            const double db = snap.beta - target->second;
            key = std::sqrt(da * da + db * db);
        } else {
            key = gap;
        }
        // strict < keeps the earliest epoch on ties (snapshots are ordered)
        if (key < best_key) {
            best_key = key;
            best = &snap;
        }
    }
    if (best == nullptr) {
        throw SelectionError(
            "no snapshot within tolerance " + format_double(tolerance) +
            " of train accuracy " + format_double(wanted) +
            "; nearest achievable accuracy is " + format_double(nearest_acc));
    }
    return *best;
}

LabeledDataset pseudo_noise(const LabeledDataset& dataset,
                            const PredictionSnapshot& snapshot) {
    dataset.validate();
    if (snapshot.predictions.size() != dataset.size()) {
        throw ConfigError("pseudo_noise: snapshot length != dataset size");
    }
    check_labels(snapshot.predictions, dataset.classes, "predicted");
    LabeledDataset out = dataset;
    out.provenance = Provenance::Pseudo;
    out.observed_labels = snapshot.predictions;
    return out;
}

void save_transition(const TransitionMatrix& transition, const std::string& path) {
    transition.validate();
    std::string out = "# noiselab transition v1 C=" +
                      format_u64(transition.classes()) + " n_i=";
    for (std::size_t i = 0; i < transition.class_counts.size(); ++i) {
        if (i > 0) out += ',';
        out += format_u64(transition.class_counts[i]);
    }
    out += '\n';
    for (std::size_t i = 0; i < transition.classes(); ++i) {
        for (std::size_t j = 0; j < transition.classes(); ++j) {
            if (j > 0) out += ',';
            out += format_double(transition.n_ij(i, j));
        }
        out += '\n';
    }
    write_text_file(path, out);
}

TransitionMatrix load_transition(const std::string& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw IngestError(path + ": empty transition file");
    }
    const std::string_view prefix = "# noiselab transition v1 ";
    auto header = trim(line);
    if (!header.starts_with(prefix)) {
        throw IngestError(path + ": line 1: missing transition comment line");
    }
    TransitionMatrix t;
    std::size_t classes = 0;
    for (auto token : split(header.substr(prefix.size()), ' ')) {
        token = trim(token);
        if (token.empty()) continue;
        if (token.starts_with("C=")) {
            classes = parse_u64(token.substr(2), path + ": line 1");
        } else if (token.starts_with("n_i=")) {
            for (auto piece : split(token.substr(4), ',')) {
                t.class_counts.push_back(parse_u64(piece, path + ": line 1"));
            }
        } else {
            throw IngestError(path + ": line 1: unknown token '" +
                              std::string(token) + "'");
        }
    }
    if (classes < 2 || t.class_counts.size() != classes) {
        throw IngestError(path + ": line 1: malformed C/n_i tokens");
    }
    t.n_ij = Matrix(classes, classes);
    std::size_t row = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tline = trim(line);
        if (tline.empty()) continue;
        if (row >= classes) {
            throw IngestError(path + ": line " + format_u64(line_no) +
                              ": more rows than C=" + format_u64(classes));
        }
        const auto fields = split(tline, ',');
        if (fields.size() != classes) {
            throw IngestError(path + ": line " + format_u64(line_no) +
                              ": expected " + format_u64(classes) + " columns");
        }
        for (std::size_t j = 0; j < classes; ++j) {
            t.n_ij(row, j) =
                parse_double(fields[j], path + ": line " + format_u64(line_no));
        }
        ++row;
    }
    if (row != classes) {
        throw IngestError(path + ": expected " + format_u64(classes) +
                          " rows, got " + format_u64(row));
    }
    t.validate();
    return t;
}

void save_snapshots(std::span<const PredictionSnapshot> snapshots,
                    const std::string& dir) {
    fs::create_directories(dir);
    std::string index = "epoch,train_acc\n";
    for (const auto& snap : snapshots) {
        index += format_u64(snap.epoch) + "," +
                 format_double(snap.train_accuracy) + "\n";
        std::string pred = "index,predicted_label\n";
        for (std::size_t i = 0; i < snap.predictions.size(); ++i) {
            pred += format_u64(i) + "," +
                    format_u64(static_cast<std::uint64_t>(snap.predictions[i])) +
                    "\n";
        }
        write_text_file(
            (fs::path(dir) / ("pred_" + format_u64(snap.epoch) + ".csv")).string(),
            pred);
    }
    write_text_file((fs::path(dir) / "snapshots.csv").string(), index);
}

void save_snapshots_wide(std::span<const PredictionSnapshot> snapshots,
                         const std::string& dir) {
    fs::create_directories(dir);
    std::string index = "epoch,train_acc\n";
    std::string wide = "index";
    for (const auto& snap : snapshots) {
        index += format_u64(snap.epoch) + "," +
                 format_double(snap.train_accuracy) + "\n";
        wide += ",epoch_" + format_u64(snap.epoch);
    }
    wide += '\n';
    const std::size_t n = snapshots.empty() ? 0 : snapshots[0].predictions.size();
    for (std::size_t i = 0; i < n; ++i) {
        wide += format_u64(i);
        for (const auto& snap : snapshots) {
            wide += ',' +
                    format_u64(static_cast<std::uint64_t>(snap.predictions[i]));
        }
        wide += '\n';
    }
    write_text_file((fs::path(dir) / "snapshots.csv").string(), index);
    write_text_file((fs::path(dir) / "predictions.csv").string(), wide);
}

namespace {

std::vector<int> parse_predictions_file(const std::string& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "index,predicted_label") {
        throw IngestError(path + ": line 1: expected header index,predicted_label");
    }
    std::vector<int> preds;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tline = trim(line);
        if (tline.empty()) continue;
        const std::string where = path + ": line " + format_u64(line_no);
        const auto fields = split(tline, ',');
        if (fields.size() != 2) {
            throw IngestError(where + ": expected 2 fields");
        }
        if (parse_u64(fields[0], where) != preds.size()) {
            throw IngestError(where + ": index out of sequence");
        }
        preds.push_back(static_cast<int>(parse_int(fields[1], where)));
    }
    return preds;
}

// Wide predictions.csv -> per-epoch prediction vectors, keyed by header.
std::vector<std::pair<std::size_t, std::vector<int>>> parse_wide_predictions(
    const std::string& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw IngestError(path + ": empty predictions file");
    }
    const auto cols = split(trim(line), ',');
    if (cols.size() < 2 || cols[0] != "index") {
        throw IngestError(path + ": line 1: expected header index,epoch_...");
    }
    std::vector<std::pair<std::size_t, std::vector<int>>> out;
    for (std::size_t k = 1; k < cols.size(); ++k) {
        if (!cols[k].starts_with("epoch_")) {
            throw IngestError(path + ": line 1: expected epoch_<e> column");
        }
        out.emplace_back(parse_u64(cols[k].substr(6), path + ": line 1"),
                         std::vector<int>{});
    }
    std::size_t row = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tline = trim(line);
        if (tline.empty()) continue;
        const std::string where = path + ": line " + format_u64(line_no);
        const auto fields = split(tline, ',');
        if (fields.size() != cols.size()) {
            throw IngestError(where + ": expected " + format_u64(cols.size()) +
                              " fields");
        }
        if (parse_u64(fields[0], where) != row) {
            throw IngestError(where + ": index out of sequence");
        }
        for (std::size_t k = 1; k < fields.size(); ++k) {
            out[k - 1].second.push_back(
                static_cast<int>(parse_int(fields[k], where)));
        }
        ++row;
    }
    return out;
}

} // namespace

std::vector<PredictionSnapshot> load_snapshots(const std::string& dir) {
    const fs::path base(dir);
    const std::string index_path = (base / "snapshots.csv").string();
    const std::string text = read_text_file(index_path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "epoch,train_acc") {
        throw IngestError(index_path + ": line 1: expected header epoch,train_acc");
    }
    std::vector<PredictionSnapshot> snapshots;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tline = trim(line);
        if (tline.empty()) continue;
        const std::string where = index_path + ": line " + format_u64(line_no);
        const auto fields = split(tline, ',');
        if (fields.size() != 2) {
            throw IngestError(where + ": expected 2 fields");
        }
        PredictionSnapshot snap;
        snap.epoch = parse_u64(fields[0], where);
        snap.train_accuracy = parse_double(fields[1], where);
        snap.alpha = std::numeric_limits<double>::quiet_NaN();
        snap.beta = std::numeric_limits<double>::quiet_NaN();
        snapshots.push_back(std::move(snap));
    }
    if (snapshots.empty()) {
        throw IngestError(index_path + ": no snapshots listed");
    }

    const bool per_epoch =
        fs::exists(base / ("pred_" + format_u64(snapshots[0].epoch) + ".csv"));
    if (per_epoch) {
        for (auto& snap : snapshots) {
            snap.predictions = parse_predictions_file(
                (base / ("pred_" + format_u64(snap.epoch) + ".csv")).string());
        }
    } else {
        const auto wide =
            parse_wide_predictions((base / "predictions.csv").string());
        for (auto& snap : snapshots) {
            bool found = false;
            for (const auto& [epoch, preds] : wide) {
                if (epoch == snap.epoch) {
                    snap.predictions = preds;
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw IngestError(dir + ": predictions.csv has no column epoch_" +
                                  format_u64(snap.epoch));
            }
        }
    }
    const std::size_t n = snapshots[0].predictions.size();
    for (const auto& snap : snapshots) {
        if (snap.predictions.size() != n) {
            throw IngestError(dir + ": snapshot prediction lengths disagree");
        }
    }
    return snapshots;
}

void annotate_snapshot_stats(std::span<PredictionSnapshot> snapshots,
                             std::span<const int> true_labels,
                             std::size_t classes) {
    for (auto& snap : snapshots) {
        if (snap.predictions.size() != true_labels.size()) {
            throw IngestError("snapshot prediction length does not match dataset");
        }
        std::size_t correct = 0;
        for (std::size_t i = 0; i < true_labels.size(); ++i) {
            if (snap.predictions[i] == true_labels[i]) ++correct;
        }
        const double acc =
            static_cast<double>(correct) / static_cast<double>(true_labels.size());
        if (acc != snap.train_accuracy) {
            throw IngestError("snapshot epoch " + format_u64(snap.epoch) +
                              ": stored accuracy " +
                              format_double(snap.train_accuracy) +
                              " does not match predictions (" +
                              format_double(acc) + "); wrong dataset?");
        }
        const auto t = estimate_transition(true_labels, snap.predictions, classes);
        const auto stats = alpha_beta(t);
        snap.alpha = stats.alpha;
        snap.beta = stats.beta;
    }
}

} // namespace noiselab
