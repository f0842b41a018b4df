#include "mfg/io.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mfg {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

namespace {

std::string meta_line(const std::string& command, const Config& cfg) {
    json meta;
    meta["cmd"] = command;
    meta["seed"] = cfg.run.seed;
    meta["digest"] = digest_hex(config_digest(cfg));
    meta["config"] = json::parse(serialize_config(cfg));
    return "# " + meta.dump() + "\n";
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << contents;
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace

CsvWriter::CsvWriter(const std::string& path, const std::string& command, const Config& cfg)
    : path_(path) {
    buffer_ = meta_line(command, cfg);
}

void CsvWriter::header(std::span<const std::string> columns) {
    for (size_t i = 0; i < columns.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += columns[i];
    }
    buffer_ += '\n';
}

void CsvWriter::row(std::span<const double> values) {
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += format_double(values[i]);
    }
    buffer_ += '\n';
}

void CsvWriter::close() {
    if (closed_) return;
    write_file(path_, buffer_);
    closed_ = true;
}

void write_rate_report(const std::string& json_path, const RateExperiment& e, const Config& cfg,
                       const std::string& command) {
    json doc;
    doc["metric"] = metric_name(e.metric);
    json rows = json::array();
    for (const auto& r : e.rows) rows.push_back({{"n", r.n}, {"value", r.value}, {"se", r.se}});
    doc["rows"] = rows;
    doc["slope"] = e.slope;
    doc["slope_se"] = e.slope_se;
    doc["floored"] = e.floored;
    if (e.metric == RateMetric::NashGain) doc["spearman"] = e.spearman_nk;
    doc["seed"] = e.seed;
    doc["config_digest"] = digest_hex(config_digest(cfg));
    write_file(json_path, doc.dump(2) + "\n");

    std::string stem = json_path;
    const auto dot = stem.rfind(".json");
    if (dot != std::string::npos) stem = stem.substr(0, dot);
    CsvWriter csv(stem + ".csv", command, cfg);
    const std::string cols[] = {"n", "value", "se"};
    csv.header(cols);
    for (const auto& r : e.rows) {
        const double vals[] = {static_cast<double>(r.n), r.value, r.se};
        csv.row(vals);
    }
    csv.close();
}

void write_objective_report(const std::string& json_path, const ObjectiveEstimate& est, int agent,
                            uint64_t seed, const Config& cfg) {
    json doc;
    doc["J_i"] = est.mean;
    doc["se"] = est.std_error;
    doc["paths"] = est.paths;
    doc["seed"] = seed;
    doc["agent"] = agent;
    doc["config_digest"] = digest_hex(config_digest(cfg));
    write_file(json_path, doc.dump(2) + "\n");
}

}  // namespace mfg
