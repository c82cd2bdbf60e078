#pragma once

#include <span>
#include <vector>

#include "noiselab/matrix.hpp"

namespace noiselab {

// Numerically stable row softmax (max-shifted).
void softmax_row(std::span<const double> logits, std::span<double> probs);
Matrix softmax(const Matrix& logits);

// log(softmax(logits))[target] for one row, max-shifted.
double log_prob_of(std::span<const double> logits, int target);

struct LossGrad {
    double loss = 0.0; // mean over rows
    Matrix dlogits;    // gradient of the mean loss w.r.t. the logits
};

// Mean softmax cross entropy with integer class targets. Gradient rows are
// (p - onehot)/batch, so each row sums to zero. Non-finite logits throw
// NumericError; a target outside [0, C) throws ConfigError.
LossGrad softmax_cross_entropy(const Matrix& logits, std::span<const int> targets);

// Same with per-row probability targets; each row must sum to 1 +- 1e-9.
LossGrad softmax_cross_entropy(const Matrix& logits, const Matrix& target_probs);

// Per-row cross entropy values, shared kernel with the batched versions.
std::vector<double> per_row_cross_entropy(const Matrix& logits,
                                          std::span<const int> targets);

// Gradient of the mean CE over a subset of rows; unselected rows get zero
// gradient. Selected rows are (p - onehot)/|subset|.
Matrix cross_entropy_grad_subset(const Matrix& logits, std::span<const int> targets,
                                 std::span<const std::size_t> selected);

} // namespace noiselab
