#include "noiselab/harness.hpp"

#include <algorithm>
#include <cmath>

#include "noiselab/errors.hpp"
#include "noiselab/loss.hpp"
#include "noiselab/rng.hpp"
#include "noiselab/util.hpp"

namespace noiselab {

namespace {

constexpr std::size_t kEvalBatch = 256;

// Distinct deterministic init stream for co-teaching's second network.
constexpr std::uint64_t kPeerSeedOffset = 0x9e3779b97f4a7c15ULL;

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), src.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto from = src.row(indices[i]);
        auto to = out.row(i);
        std::copy(from.begin(), from.end(), to.begin());
    }
    return out;
}

std::vector<int> gather_labels(std::span<const int> labels,
                               std::span<const std::size_t> indices) {
    std::vector<int> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out[i] = labels[indices[i]];
    }
    return out;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

void check_finite_loss(double loss, std::size_t epoch) {
    if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " +
                           format_u64(epoch));
    }
}

} // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    schedule.validate();
    if (method_params.gce_q <= 0.0 || method_params.gce_q > 1.0) {
        throw ConfigError("gce_q must lie in (0, 1]");
    }
    if (method_params.boot_b < 0.0 || method_params.boot_b > 1.0) {
        throw ConfigError("boot_b must lie in [0, 1]");
    }
    if (method_params.sce_a < 0.0 || method_params.sce_b < 0.0) {
        throw ConfigError("sce weights must be >= 0");
    }
    if (method_params.coteach_tau < 0.0 || method_params.coteach_tau >= 1.0) {
        throw ConfigError("coteach_tau must lie in [0, 1)");
    }
    if (method_params.coteach_warmup < 1) {
        throw ConfigError("coteach_warmup must be >= 1");
    }
}

void RunRecord::finalize() {
    mota_epoch = mota(test_acc);
    acc_at_mota = test_acc[mota_epoch - 1];
    acc_at_final = test_acc.back();
    if (lr_noisy) {
        lrn_at_mota = (*lr_noisy)[mota_epoch - 1];
        lrn_at_final = lr_noisy->back();
    }
}

std::vector<int> predict_all(const Model& model, const Matrix& features) {
    std::vector<int> predictions;
    predictions.reserve(features.rows());
    std::vector<std::size_t> indices;
    for (std::size_t start = 0; start < features.rows(); start += kEvalBatch) {
        const std::size_t end = std::min(start + kEvalBatch, features.rows());
        indices.clear();
        for (std::size_t i = start; i < end; ++i) indices.push_back(i);
        const Matrix batch = gather_rows(features, indices);
        const auto preds = model.predict(batch);
        predictions.insert(predictions.end(), preds.begin(), preds.end());
    }
    return predictions;
}

SnapshotSet train_clean(const LabeledDataset& train, const ModelSpec& model_spec,
                        const TrainConfig& config) {
    train.validate();
    config.validate();
    if (train.size() == 0) {
        throw ConfigError("train_clean: empty training set");
    }
    if (train.provenance != Provenance::Clean) {
        throw ConfigError("train_clean requires a clean dataset");
    }

    Model model = Model::init(model_spec);
    AdamState opt = AdamState::init(model.param_count(),
                                    {config.lr, 0.9, 0.999, 1e-8});
    std::vector<double> grads(model.param_count());
    Rng shuffle_rng(config.shuffle_seed);
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    SnapshotSet set;
    set.model = model_spec;
    set.config = config;

    Model::Cache cache;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const double mult = lr_multiplier(config.schedule, epoch);
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += config.batch_size) {
            const std::size_t end =
                std::min(start + config.batch_size, order.size());
            const std::span<const std::size_t> idx(order.data() + start,
                                                   end - start);
            const Matrix batch = gather_rows(train.features, idx);
            const auto labels = gather_labels(train.observed_labels, idx);
            try {
                const Matrix logits = model.forward_cached(batch, cache);
                const LossGrad lg = softmax_cross_entropy(logits, labels);
                check_finite_loss(lg.loss, epoch);
                model.backward(cache, lg.dlogits, grads);
                adam_step(model.params(), grads, opt, mult);
            } catch (const NumericError& err) {
                throw NumericError("training diverged at epoch " +
                                   format_u64(epoch) + ": " + err.what());
            }
        }

        PredictionSnapshot snap;
        snap.epoch = epoch;
        snap.predictions = predict_all(model, train.features);
        snap.train_accuracy = accuracy(snap.predictions, train.true_labels);
        const auto transition = estimate_transition(
            train.true_labels, snap.predictions, train.classes);
        const auto stats = alpha_beta(transition);
        snap.alpha = stats.alpha;
        snap.beta = stats.beta;
        set.snapshots.push_back(std::move(snap));
    }
    return set;
}

RunRecord train_noisy(const LabeledDataset& train, const LabeledDataset& test,
                      const ModelSpec& model_spec, const TrainConfig& config) {
    train.validate();
    test.validate();
    config.validate();
    if (train.size() == 0 || test.size() == 0) {
        throw ConfigError("train_noisy: train and test sets must be nonempty");
    }

    std::vector<char> clean_mask(train.size());
    std::size_t clean_count = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        clean_mask[i] = train.is_clean(i) ? 1 : 0;
        clean_count += clean_mask[i];
    }
    const bool has_clean = clean_count > 0;
    const bool has_noisy = clean_count < train.size();

    Model model_a = Model::init(model_spec);
    AdamState opt_a = AdamState::init(model_a.param_count(),
                                      {config.lr, 0.9, 0.999, 1e-8});
    std::vector<double> grads(model_a.param_count());

    // Co-teaching's peer network; untouched for other methods.
    std::optional<Model> model_b;
    std::optional<AdamState> opt_b;
    if (config.method == Method::Coteaching) {
        ModelSpec peer_spec = model_spec;
        peer_spec.init_seed = model_spec.init_seed ^ kPeerSeedOffset;
        model_b = Model::init(peer_spec);
        opt_b = AdamState::init(model_b->param_count(),
                                {config.lr, 0.9, 0.999, 1e-8});
    }

    Rng shuffle_rng(config.shuffle_seed);
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    RunRecord record;
    if (has_clean) record.lr_clean = std::vector<double>{};
    if (has_noisy) record.lr_noisy = std::vector<double>{};

    Model::Cache cache_a;
    Model::Cache cache_b;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const double mult = lr_multiplier(config.schedule, epoch);
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += config.batch_size) {
            const std::size_t end =
                std::min(start + config.batch_size, order.size());
            const std::span<const std::size_t> idx(order.data() + start,
                                                   end - start);
            const Matrix batch = gather_rows(train.features, idx);
            const auto labels = gather_labels(train.observed_labels, idx);

            try {
                if (config.method == Method::Coteaching) {
                    const Matrix logits_a = model_a.forward_cached(batch, cache_a);
                    const Matrix logits_b = model_b->forward_cached(batch, cache_b);
                    const auto losses_a = per_row_cross_entropy(logits_a, labels);
                    const auto losses_b = per_row_cross_entropy(logits_b, labels);
                    const double keep = keep_fraction_schedule(
                        epoch - 1, config.method_params.coteach_tau,
                        config.method_params.coteach_warmup);
                    const auto [sel_a, sel_b] =
                        coteach_select(losses_a, losses_b, keep);

                    double batch_loss = 0.0;
                    for (std::size_t s : sel_a) batch_loss += losses_a[s];
                    check_finite_loss(batch_loss, epoch);

                    const Matrix dlogits_a =
                        cross_entropy_grad_subset(logits_a, labels, sel_a);
                    model_a.backward(cache_a, dlogits_a, grads);
                    adam_step(model_a.params(), grads, opt_a, mult);

                    const Matrix dlogits_b =
                        cross_entropy_grad_subset(logits_b, labels, sel_b);
                    model_b->backward(cache_b, dlogits_b, grads);
                    adam_step(model_b->params(), grads, *opt_b, mult);
                } else {
                    const Matrix logits = model_a.forward_cached(batch, cache_a);
                    const BatchLoss bl = method_batch_loss(
                        config.method, logits, labels, config.method_params);
                    check_finite_loss(bl.loss, epoch);
                    model_a.backward(cache_a, bl.dlogits, grads);
                    adam_step(model_a.params(), grads, opt_a, mult);
                }
            } catch (const NumericError& err) {
                throw NumericError("training diverged at epoch " +
                                   format_u64(epoch) + ": " + err.what());
            }
        }

        // Deterministic end-of-epoch evaluation; metrics come from network A.
        const auto train_preds = predict_all(model_a, train.features);
        const auto test_preds = predict_all(model_a, test.features);
        record.train_acc.push_back(accuracy(train_preds, train.observed_labels));
        record.test_acc.push_back(accuracy(test_preds, test.true_labels));
        record.lr_mult.push_back(mult);
        const RecallPair recall =
            label_recall(train_preds, train.observed_labels, clean_mask);
        if (record.lr_clean) record.lr_clean->push_back(*recall.clean);
        if (record.lr_noisy) record.lr_noisy->push_back(*recall.noisy);
    }
    record.finalize();
    return record;
}

RecallPair label_recall(std::span<const int> predictions,
                        std::span<const int> observed_labels,
                        std::span<const char> clean_mask) {
    if (predictions.size() != observed_labels.size() ||
        predictions.size() != clean_mask.size()) {
        throw ConfigError("label_recall: input length mismatch");
    }
    std::size_t clean_total = 0, clean_hit = 0;
    std::size_t noisy_total = 0, noisy_hit = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool hit = predictions[i] == observed_labels[i];
        if (clean_mask[i]) {
            ++clean_total;
            clean_hit += hit;
        } else {
            ++noisy_total;
            noisy_hit += hit;
        }
    }
    RecallPair out;
    if (clean_total > 0) {
        out.clean = static_cast<double>(clean_hit) /
                    static_cast<double>(clean_total);
    }
    if (noisy_total > 0) {
        out.noisy = static_cast<double>(noisy_hit) /
                    static_cast<double>(noisy_total);
    }
    return out;
}

std::size_t mota(std::span<const double> test_accuracy) {
    if (test_accuracy.empty()) {
        throw ConfigError("mota: empty accuracy vector");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < test_accuracy.size(); ++i) {
        if (test_accuracy[i] > test_accuracy[best]) best = i;
    }
    return best + 1;
}

} // namespace noiselab
