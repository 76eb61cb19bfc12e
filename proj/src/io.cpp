#include "cora/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cora {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) line += ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") == std::string::npos) {
            line += f;
            continue;
        }
        line += '"';
        for (char c : f) {
            if (c == '"') line += '"';
            line += c;
        }
        line += '"';
    }
    line += '\n';
    return line;
}

std::string metrics_csv(const RunMetrics& metrics) {
    std::string out =
        csv_line({"step", "train_loss", "eval_loss", "eval_accuracy", "trainable_params"});
    for (const MetricsRow& row : metrics.rows)
        out += csv_line({std::to_string(row.step), format_double(row.train_loss),
                         format_double(row.eval_loss), format_double(row.eval_accuracy),
                         std::to_string(row.trainable_params)});
    return out;
}

std::string sweep_metrics_csv(const std::vector<SweepCell>& cells) {
    std::string out = csv_line({"rank", "regime", "seed", "step", "train_loss", "eval_loss",
                                "eval_accuracy", "trainable_params"});
    for (const SweepCell& c : cells) {
        if (!c.error.empty()) continue;
        for (const MetricsRow& row : c.metrics.rows)
            out += csv_line({std::to_string(c.rank), to_string(c.regime), std::to_string(c.seed),
                             std::to_string(row.step), format_double(row.train_loss),
                             format_double(row.eval_loss), format_double(row.eval_accuracy),
                             std::to_string(row.trainable_params)});
    }
    return out;
}

std::string sweep_summary_csv(const std::vector<SweepCell>& cells) {
    std::string out =
        csv_line({"rank", "regime", "seed", "best_eval_loss", "final_eval_loss",
                  "final_eval_accuracy", "trainable_params", "error"});
    for (const SweepCell& c : cells)
        out += csv_line({std::to_string(c.rank), to_string(c.regime), std::to_string(c.seed),
                         format_double(c.metrics.best_eval_loss),
                         format_double(c.metrics.final_eval_loss),
                         format_double(c.metrics.final_eval_accuracy),
                         std::to_string(c.metrics.trainable_params), c.error});
    return out;
}

std::string variance_report_csv(const std::vector<VarianceCountRow>& rows) {
    std::string out = csv_line({"method", "threshold", "count"});
    for (const VarianceCountRow& row : rows)
        out += csv_line(
            {to_string(row.method), format_double(row.threshold), std::to_string(row.count)});
    return out;
}

std::string variance_curves_csv(const std::vector<VarianceCurvePoint>& points) {
    std::string out = csv_line({"method", "component", "cumulative_fraction"});
    for (const VarianceCurvePoint& p : points)
        out += csv_line({to_string(p.method), std::to_string(p.component),
                         format_double(p.cumulative_fraction)});
    return out;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("io: cannot open " + tmp + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("io: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("io: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace cora
