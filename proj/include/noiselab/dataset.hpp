#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "noiselab/matrix.hpp"

namespace noiselab {

enum class Provenance { Clean, Symmetric, Asymmetric, Randomized, Pseudo };

Provenance provenance_from_string(const std::string& tag);
std::string to_string(Provenance provenance);

struct ImageShape {
    std::size_t h = 0, w = 0, c = 0;
};

// Feature matrix plus true and observed labels. Clean datasets have
// observed == true everywhere; the clean/noisy mask is derived, never stored.
struct LabeledDataset {
    Matrix features; // n x d (images flattened row-major h*w*c)
    std::vector<int> true_labels;
    std::vector<int> observed_labels;
    std::size_t classes = 0;
    Provenance provenance = Provenance::Clean;
    std::optional<ImageShape> image_shape;

    std::size_t size() const { return true_labels.size(); }
    std::size_t dim() const { return features.cols(); }

    // true if observed == true for example i
    bool is_clean(std::size_t i) const {
        return observed_labels[i] == true_labels[i];
    }
    std::size_t noisy_count() const;
    double noise_rate() const; // (#observed != true) / n

    void validate() const;
};

struct SplitSpec {
    double test_fraction = 0.2; // in (0, 1)
    std::uint64_t shuffle_seed = 7;
};

// Synthetic clean dataset with controllable class confusability. Classes
// are laid out in pairs of Gaussian clusters; paired means move together as
// confusability -> 1, which is what makes a partially trained network
// mislabel within pairs.
LabeledDataset gen_confusable_blobs(std::size_t classes, std::size_t n_per_class,
                                    std::size_t dim, double confusability,
                                    std::uint64_t seed);

// Deterministic shuffle split into (train, test).
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset,
                                                const SplitSpec& spec);

// noiselab CSV: leading comment `# noiselab v1 provenance=<tag> C=<C>`,
// header `index,true_label,observed_label,f0,...,f{d-1}`. Features are
// written as shortest round-trip decimal text, so save/load is lossless.
void save_csv(const LabeledDataset& dataset, const std::string& path);
LabeledDataset load_csv(const std::string& path);

// Aliases for the noisy-dataset persistence surface.
void save_noisy(const LabeledDataset& dataset, const std::string& path);
LabeledDataset load_noisy(const std::string& path);

// Standard big-endian IDX byte image/label files; pixels scaled to [0, 1].
// class_count = 0 infers C as max label + 1.
LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path,
                        std::size_t class_count = 0);

} // namespace noiselab
