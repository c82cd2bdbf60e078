#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noiselab/dataset.hpp"
#include "noiselab/matrix.hpp"

namespace noiselab {

// Row-stochastic C x C matrix of conditional frequencies
// P(observed = j | true = i), plus the per-true-class example counts.
// Rows with n_i = 0 are all-zero and flagged undefined.
struct TransitionMatrix {
    Matrix n_ij;
    std::vector<std::size_t> class_counts; // n_i

    std::size_t classes() const { return n_ij.rows(); }
    bool row_defined(std::size_t i) const { return class_counts[i] > 0; }
    void validate() const;
};

// Shape summary of a noise distribution: alpha is the population standard
// deviation of the transition diagonal, N_j the raw column sums, beta the
// population standard deviation of N_j, tau the noise rate.
struct NoiseStats {
    double alpha = 0.0;
    double beta = 0.0;
    std::vector<double> column_sums; // N_j
    double tau = 0.0;                // 1 - sum_i (n_i/n) * N_ii
};

// Argmax predictions of the clean-training model over the training set at
// the end of one epoch, with the training accuracy and the alpha/beta of
// the noise those predictions would induce.
struct PredictionSnapshot {
    std::size_t epoch = 0; // 1-based
    double train_accuracy = 0.0;
    std::vector<int> predictions;
    double alpha = 0.0;
    double beta = 0.0;
};

TransitionMatrix estimate_transition(std::span<const int> true_labels,
                                     std::span<const int> observed_labels,
                                     std::size_t classes);

// Throws StatsError naming the empty classes when undefined rows exist.
NoiseStats alpha_beta(const TransitionMatrix& transition);

// Exactly round(tau*n) uniformly chosen examples are relabeled uniformly
// over the C-1 other classes.
LabeledDataset symmetric_noise(const LabeledDataset& dataset, double tau,
                               std::uint64_t seed);

// Exactly round(tau*n_i) uniformly chosen examples of each class i are
// relabeled to (i+1) mod C.
LabeledDataset asymmetric_noise(const LabeledDataset& dataset, double tau,
                                std::uint64_t seed);

// Per-cell counts come from largest-remainder rounding of n_i*N_ij, so the
// transition matrix re-estimated from the output matches the input within
// 1/n_i per cell; which examples land in each cell is random.
LabeledDataset randomized_noise(const LabeledDataset& dataset,
                                const TransitionMatrix& transition,
                                std::uint64_t seed);

// Candidates are snapshots within `tolerance` of train accuracy 1-tau.
// With a target, picks the candidate nearest (alpha*, beta*) in Euclidean
// distance; otherwise the accuracy-closest one. Ties break to the earliest
// epoch. Empty candidate set throws SelectionError reporting the nearest
// achievable accuracy.
PredictionSnapshot select_snapshot(
    std::span<const PredictionSnapshot> snapshots, double tau, double tolerance,
    std::optional<std::pair<double, double>> target = std::nullopt);

// Observed labels become the snapshot predictions verbatim; the noise rate
// is exactly 1 - snapshot train accuracy.
LabeledDataset pseudo_noise(const LabeledDataset& dataset,
                            const PredictionSnapshot& snapshot);

// Transition matrix file: a comment line recording n_i, then C rows of C
// comma-separated frequencies.
void save_transition(const TransitionMatrix& transition, const std::string& path);
TransitionMatrix load_transition(const std::string& path);

// Snapshot directory: `snapshots.csv` (header epoch,train_acc) plus either
// one `pred_<epoch>.csv` per epoch (header index,predicted_label) or a
// single wide `predictions.csv` (header index,epoch_1,...,epoch_E).
// alpha/beta are not persisted; annotate_snapshot_stats recomputes them
// against the clean labels.
void save_snapshots(std::span<const PredictionSnapshot> snapshots,
                    const std::string& dir);
void save_snapshots_wide(std::span<const PredictionSnapshot> snapshots,
                         const std::string& dir);
std::vector<PredictionSnapshot> load_snapshots(const std::string& dir);
void annotate_snapshot_stats(std::span<PredictionSnapshot> snapshots,
                             std::span<const int> true_labels,
                             std::size_t classes);

} // namespace noiselab
