#pragma once

#include <optional>
#include <string>
#include <vector>

#include "noiselab/harness.hpp"

namespace noiselab {

// One method/noise-type line of the comparison summary.
struct ComparisonRow {
    std::string method;
    std::string noise_type;
    double tau = 0.0;
    double acc_mota = 0.0;
    double acc_final = 0.0;
    std::optional<double> lrn_mota;
    std::optional<double> lrn_final;
};

ComparisonRow make_comparison_row(const std::string& method,
                                  const std::string& noise_type, double tau,
                                  const RunRecord& record);

// Metrics CSV: header epoch,lr_mult,train_acc,test_acc,lr_clean,lr_noisy;
// epochs 1-based; absent recalls are empty fields; full-precision values.
void emit_metrics_csv(const RunRecord& record, const std::string& path);
RunRecord read_metrics_csv(const std::string& path);

// Summary CSV sorted by (noise_type, tau, method); 4-decimal values.
void emit_summary(std::vector<ComparisonRow> rows, const std::string& path);

enum class CurvePanel { LabelRecall, Accuracy };

// One polyline per series (LR_clean/LR_noisy or train/test accuracy per
// record), axes, a legend, and per record a vertical class="mota" marker.
// All records must share the epoch count. Output is deterministic,
// well-formed XML.
void emit_svg_curves(
    const std::vector<std::pair<std::string, RunRecord>>& records,
    CurvePanel panel, const std::string& path);

} // namespace noiselab
