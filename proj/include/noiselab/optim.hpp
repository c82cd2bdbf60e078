#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace noiselab {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9; // the "momentum" knob
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter first/second moment estimates plus the completed-step count.
struct AdamState {
    AdamHyper hyper;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    static AdamState init(std::size_t param_count, AdamHyper hyper);
};

// One bias-corrected Adam update. The effective learning rate is
// hyper.lr * lr_multiplier; shapes must agree or ConfigError is thrown.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr_multiplier);

// Learning-rate schedule as absolute multipliers of the initial rate,
// keyed by epoch breakpoints. Breakpoint epochs must be strictly
// increasing and multipliers must lie in (0, 1].
struct ScheduleSpec {
    std::string name = "constant";
    std::vector<std::pair<std::uint64_t, double>> breakpoints;

    static ScheduleSpec constant();
    static ScheduleSpec decay1(); // 0.5 @ 20, 0.25 @ 30, 0.1 @ 40
    static ScheduleSpec decay2(); // 0.1 @ 80/120/160, 0.5 @ 180
    static ScheduleSpec named(const std::string& name);

    void validate() const;
};

// Multiplier of the last breakpoint with epoch <= the given epoch, else 1.
double lr_multiplier(const ScheduleSpec& schedule, std::uint64_t epoch);

} // namespace noiselab
