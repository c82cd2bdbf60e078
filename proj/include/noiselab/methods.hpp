#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noiselab/matrix.hpp"

namespace noiselab {

enum class Method { Standard, Coteaching, Sce, Gce, Bootsoft };

Method method_from_string(const std::string& name);
std::string to_string(Method method);

struct MethodParams {
    double sce_a = 0.1;         // CE weight
    double sce_b = 1.0;         // reverse-CE weight
    double sce_clamp = -4.0;    // log 0 clamp constant A
    double gce_q = 0.7;
    double boot_b = 0.95;       // weight on the given label
    double coteach_tau = 0.2;   // target noise rate for the keep schedule
    std::uint64_t coteach_warmup = 10; // E_k
};

// Symmetric cross entropy for one logits row:
//   a_s * CE(p, y) + b_s * RCE(p, y), RCE = -sum_k p_k log q_k with
//   log 0 clamped to `clamp_a`, so RCE = -clamp_a * (1 - p_y).
double sce_loss(std::span<const double> logits, int target, double a_s,
                double b_s, double clamp_a = -4.0);

// Generalized cross entropy: (1 - p_y^q) / q, q in (0, 1].
double gce_loss(std::span<const double> logits, int target, double q);

// Soft bootstrap: CE against b_b*onehot(y) + (1-b_b)*p with p treated as
// constant w.r.t. the gradient.
double bootsoft_loss(std::span<const double> logits, int target, double b_b);

// Mean loss and dMeanLoss/dlogits for a batch under the given method.
// Standard uses plain cross entropy; Coteaching is handled by the harness.
struct BatchLoss {
    double loss = 0.0;
    Matrix dlogits;
};
BatchLoss method_batch_loss(Method method, const Matrix& logits,
                            std::span<const int> targets,
                            const MethodParams& params);

// Each network keeps the ceil(keep*m) smallest-loss examples under the
// peer's losses; ties break to the lower index. Returned index lists are
// ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> coteach_select(
    std::span<const double> losses_a, std::span<const double> losses_b,
    double keep_fraction);

// Linear ramp 1 -> 1-tau over the first `warmup` epochs, constant after:
// 1 - tau * min(epoch/warmup, 1). `epoch` counts completed epochs.
double keep_fraction_schedule(std::uint64_t epoch, double tau,
                              std::uint64_t warmup);

} // namespace noiselab
