#include "noiselab/report.hpp"

#include <algorithm>
#include <sstream>

#include "noiselab/errors.hpp"
#include "noiselab/util.hpp"

namespace noiselab {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                          "#bcbd22", "#17becf"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

// Plot geometry: 800x500 viewbox with 10% margins, axes [0, E] x [0, 1].
constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kMarginX = 80.0;
constexpr double kMarginY = 50.0;

double map_x(double epoch, double max_epoch) {
    return kMarginX + epoch / max_epoch * (kWidth - 2.0 * kMarginX);
}

double map_y(double value) {
    return (kHeight - kMarginY) - value * (kHeight - 2.0 * kMarginY);
}

std::string xml_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

std::string polyline(const std::vector<double>& values, const char* color) {
    const double max_epoch = static_cast<double>(values.size());
    std::string points;
    for (std::size_t e = 0; e < values.size(); ++e) {
        if (e > 0) points += ' ';
        points += format_fixed(map_x(static_cast<double>(e + 1), max_epoch), 2);
        points += ',';
        points += format_fixed(map_y(values[e]), 2);
    }
    return "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
}

} // namespace

ComparisonRow make_comparison_row(const std::string& method,
                                  const std::string& noise_type, double tau,
                                  const RunRecord& record) {
    ComparisonRow row;
    row.method = method;
    row.noise_type = noise_type;
    row.tau = tau;
    row.acc_mota = record.acc_at_mota;
    row.acc_final = record.acc_at_final;
    row.lrn_mota = record.lrn_at_mota;
    row.lrn_final = record.lrn_at_final;
    return row;
}

void emit_metrics_csv(const RunRecord& record, const std::string& path) {
    if (record.epochs() == 0 || record.train_acc.size() != record.epochs() ||
        record.lr_mult.size() != record.epochs() ||
        (record.lr_clean && record.lr_clean->size() != record.epochs()) ||
        (record.lr_noisy && record.lr_noisy->size() != record.epochs())) {
        throw ConfigError("emit_metrics_csv: incomplete run record");
    }
    std::string out = "epoch,lr_mult,train_acc,test_acc,lr_clean,lr_noisy\n";
    for (std::size_t e = 0; e < record.epochs(); ++e) {
        out += format_u64(e + 1);
        out += ',';
        out += format_double(record.lr_mult[e]);
        out += ',';
        out += format_double(record.train_acc[e]);
        out += ',';
        out += format_double(record.test_acc[e]);
        out += ',';
        if (record.lr_clean) out += format_double((*record.lr_clean)[e]);
        out += ',';
        if (record.lr_noisy) out += format_double((*record.lr_noisy)[e]);
        out += '\n';
    }
    write_text_file(path, out);
}

RunRecord read_metrics_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) ||
        trim(line) != "epoch,lr_mult,train_acc,test_acc,lr_clean,lr_noisy") {
        throw IngestError(path + ": line 1: unexpected metrics header");
    }
    RunRecord record;
    std::size_t line_no = 1;
    std::size_t epoch = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tline = trim(line);
        if (tline.empty()) continue;
        ++epoch;
        const std::string where = path + ": line " + format_u64(line_no);
        const auto fields = split(tline, ',');
        if (fields.size() != 6) {
            throw IngestError(where + ": expected 6 fields");
        }
        if (parse_u64(fields[0], where) != epoch) {
            throw IngestError(where + ": epoch out of sequence");
        }
        record.lr_mult.push_back(parse_double(fields[1], where));
        record.train_acc.push_back(parse_double(fields[2], where));
        record.test_acc.push_back(parse_double(fields[3], where));
        const bool has_clean = !trim(fields[4]).empty();
        const bool has_noisy = !trim(fields[5]).empty();
        if (epoch == 1) {
            if (has_clean) record.lr_clean = std::vector<double>{};
            if (has_noisy) record.lr_noisy = std::vector<double>{};
        }
        if (has_clean != record.lr_clean.has_value() ||
            has_noisy != record.lr_noisy.has_value()) {
            throw IngestError(where + ": inconsistent empty recall fields");
        }
        if (has_clean) record.lr_clean->push_back(parse_double(fields[4], where));
        if (has_noisy) record.lr_noisy->push_back(parse_double(fields[5], where));
    }
    if (epoch == 0) {
        throw IngestError(path + ": no data rows");
    }
    record.finalize();
    return record;
}

void emit_summary(std::vector<ComparisonRow> rows, const std::string& path) {
    if (rows.empty()) {
        throw ConfigError("emit_summary: no rows");
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.noise_type != b.noise_type) return a.noise_type < b.noise_type;
        if (a.tau != b.tau) return a.tau < b.tau;
        return a.method < b.method;
    });
    std::string out = "method,noise_type,tau,acc_mota,acc_final,lrn_mota,lrn_final\n";
    for (const auto& row : rows) {
        out += row.method + ',' + row.noise_type + ',' + format_fixed(row.tau, 4) +
               ',' + format_fixed(row.acc_mota, 4) + ',' +
               format_fixed(row.acc_final, 4) + ',';
        if (row.lrn_mota) out += format_fixed(*row.lrn_mota, 4);
        out += ',';
        if (row.lrn_final) out += format_fixed(*row.lrn_final, 4);
        out += '\n';
    }
    write_text_file(path, out);
}

void emit_svg_curves(
    const std::vector<std::pair<std::string, RunRecord>>& records,
    CurvePanel panel, const std::string& path) {
    if (records.empty()) {
        throw ConfigError("emit_svg_curves: no records");
    }
    const std::size_t epochs = records[0].second.epochs();
    for (const auto& [name, record] : records) {
        if (record.epochs() != epochs) {
            throw ConfigError("emit_svg_curves: records have mismatched epoch counts");
        }
    }

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\" "
           "font-family=\"monospace\" font-size=\"12\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
    svg += "<line class=\"axis\" x1=\"80\" y1=\"450\" x2=\"720\" y2=\"450\" "
           "stroke=\"black\"/>\n";
    svg += "<line class=\"axis\" x1=\"80\" y1=\"50\" x2=\"80\" y2=\"450\" "
           "stroke=\"black\"/>\n";
    // axis labels
    svg += "<text x=\"76\" y=\"465\" text-anchor=\"end\">0</text>\n";
    svg += "<text x=\"720\" y=\"465\" text-anchor=\"middle\">" +
           format_u64(epochs) + "</text>\n";
    svg += "<text x=\"400\" y=\"485\" text-anchor=\"middle\">epoch</text>\n";
    svg += "<text x=\"76\" y=\"454\" text-anchor=\"end\">0.0</text>\n";
    svg += "<text x=\"76\" y=\"254\" text-anchor=\"end\">0.5</text>\n";
    svg += "<text x=\"76\" y=\"54\" text-anchor=\"end\">1.0</text>\n";
    svg += "<text x=\"400\" y=\"30\" text-anchor=\"middle\">" +
           std::string(panel == CurvePanel::Accuracy ? "accuracy"
                                                     : "label recall") +
           "</text>\n";

    struct Series {
        std::string label;
        const std::vector<double>* values;
    };
    std::vector<Series> series;
    for (const auto& [name, record] : records) {
        if (panel == CurvePanel::Accuracy) {
            series.push_back({name + " train", &record.train_acc});
            series.push_back({name + " test", &record.test_acc});
        } else {
            if (record.lr_clean) {
                series.push_back({name + " LR_clean", &*record.lr_clean});
            }
            if (record.lr_noisy) {
                series.push_back({name + " LR_noisy", &*record.lr_noisy});
            }
        }
    }

    for (std::size_t s = 0; s < series.size(); ++s) {
        svg += polyline(*series[s].values, kPalette[s % kPaletteSize]);
    }

    // vertical MOTA marker per record
    for (const auto& [name, record] : records) {
        const double x =
            map_x(static_cast<double>(record.mota_epoch), static_cast<double>(epochs));
        svg += "<line class=\"mota\" x1=\"" + format_fixed(x, 2) +
               "\" y1=\"50\" x2=\"" + format_fixed(x, 2) +
               "\" y2=\"450\" stroke=\"#2ca02c\" stroke-dasharray=\"4 3\"/>\n";
    }

    // legend
    for (std::size_t s = 0; s < series.size(); ++s) {
        const double ly = 60.0 + 16.0 * static_cast<double>(s);
        svg += "<rect x=\"590\" y=\"" + format_fixed(ly - 9.0, 2) +
               "\" width=\"12\" height=\"4\" fill=\"" +
               std::string(kPalette[s % kPaletteSize]) + "\"/>\n";
        svg += "<text x=\"606\" y=\"" + format_fixed(ly, 2) + "\">" +
               xml_escape(series[s].label) + "</text>\n";
    }

    svg += "</svg>\n";
    write_text_file(path, svg);
}

} // namespace noiselab
