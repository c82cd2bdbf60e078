#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "noiselab/dataset.hpp"
#include "noiselab/methods.hpp"
#include "noiselab/model.hpp"
#include "noiselab/noise.hpp"
#include "noiselab/optim.hpp"

namespace noiselab {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    ScheduleSpec schedule = ScheduleSpec::decay1();
    std::uint64_t shuffle_seed = 1;
    Method method = Method::Standard;
    MethodParams method_params;

    void validate() const;
};

// Per-epoch metrics of one noisy-training run plus the MOTA summary.
// lr_clean / lr_noisy are absent when the corresponding group is empty.
struct RunRecord {
    std::vector<double> train_acc;
    std::vector<double> test_acc;
    std::vector<double> lr_mult;
    std::optional<std::vector<double>> lr_clean;
    std::optional<std::vector<double>> lr_noisy;

    std::size_t mota_epoch = 0; // 1-based, earliest maximum of test_acc
    double acc_at_mota = 0.0;
    double acc_at_final = 0.0;
    std::optional<double> lrn_at_mota;
    std::optional<double> lrn_at_final;

    std::size_t epochs() const { return test_acc.size(); }
    void finalize(); // fills the summary fields from the vectors
};

struct SnapshotSet {
    std::vector<PredictionSnapshot> snapshots;
    ModelSpec model;
    TrainConfig config;
};

struct RecallPair {
    std::optional<double> clean;
    std::optional<double> noisy;
};

// Clean training with per-epoch snapshot capture. Predictions come from a
// deterministic full-dataset evaluation pass at epoch end; each snapshot
// carries the alpha/beta its predictions would induce as noise.
SnapshotSet train_clean(const LabeledDataset& train, const ModelSpec& model_spec,
                        const TrainConfig& config);

// Noisy training under the configured method. Gradients depend only on
// observed_labels; true_labels feed the recall metrics and nothing else.
// Co-teaching trains two networks and reports network A.
RunRecord train_noisy(const LabeledDataset& train, const LabeledDataset& test,
                      const ModelSpec& model_spec, const TrainConfig& config);

// "Correct" means prediction == observed training label, so the noisy
// recall measures how much of the wrong labels the model has fit.
RecallPair label_recall(std::span<const int> predictions,
                        std::span<const int> observed_labels,
                        std::span<const char> clean_mask);

// Earliest epoch (1-based) achieving the maximum test accuracy.
std::size_t mota(std::span<const double> test_accuracy);

// Deterministic batched argmax predictions over a whole feature matrix.
std::vector<int> predict_all(const Model& model, const Matrix& features);

} // namespace noiselab
