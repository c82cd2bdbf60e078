#include "noiselab/optim.hpp"

#include <cmath>

#include "noiselab/errors.hpp"

namespace noiselab {

AdamState AdamState::init(std::size_t param_count, AdamHyper hyper) {
    AdamState state;
    state.hyper = hyper;
    state.m.assign(param_count, 0.0);
    state.v.assign(param_count, 0.0);
    state.t = 0;
    return state;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr_multiplier) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ConfigError("adam_step: parameter/gradient/state size mismatch");
    }
    state.t += 1;
    const AdamHyper& h = state.hyper;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
    const double step = h.lr * lr_multiplier;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
        state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= step * m_hat / (std::sqrt(v_hat) + h.eps);
    }
}

ScheduleSpec ScheduleSpec::constant() {
    return ScheduleSpec{"constant", {}};
}

ScheduleSpec ScheduleSpec::decay1() {
    return ScheduleSpec{"decay1", {{20, 0.5}, {30, 0.25}, {40, 0.1}}};
}

ScheduleSpec ScheduleSpec::decay2() {
    return ScheduleSpec{"decay2", {{80, 0.1}, {120, 0.1}, {160, 0.1}, {180, 0.5}}};
}

ScheduleSpec ScheduleSpec::named(const std::string& name) {
    if (name == "constant") return constant();
    if (name == "decay1") return decay1();
    if (name == "decay2") return decay2();
    throw ConfigError("unknown schedule: " + name);
}

void ScheduleSpec::validate() const {
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        const auto& [epoch, mult] = breakpoints[i];
        if (mult <= 0.0 || mult > 1.0) {
            throw ConfigError("schedule multiplier out of (0, 1]");
        }
        if (i > 0 && breakpoints[i - 1].first >= epoch) {
            throw ConfigError("schedule breakpoint epochs must strictly increase");
        }
    }
}

double lr_multiplier(const ScheduleSpec& schedule, std::uint64_t epoch) {
    double mult = 1.0;
    for (const auto& [bp_epoch, bp_mult] : schedule.breakpoints) {
        if (bp_epoch <= epoch) {
            mult = bp_mult;
        } else {
            break;
        }
    }
    return mult;
}

} // namespace noiselab
