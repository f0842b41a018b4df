#pragma once

#include "mfg/model.hpp"
#include "mfg/verify.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mfg {

/// Shortest 17-significant-digit decimal form; reparses to the same bits.
std::string format_double(double v);

/// CSV with a `#`-prefixed JSON metadata comment line (command, seed, config
/// digest and full config), comma separators, LF endings. Any output file is
/// reproducible from its own header line.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& command, const Config& cfg);
    void header(std::span<const std::string> columns);
    void row(std::span<const double> values);
    void close();
    const std::string& path() const { return path_; }

  private:
    std::string path_;
    std::string buffer_;
    bool closed_ = false;
};

/// Writes the experiment report JSON:
/// {metric, rows:[{n,value,se}], slope, slope_se, floored, spearman, seed,
///  config_digest} plus a CSV mirror `<stem>.csv` next to it.
void write_rate_report(const std::string& json_path, const RateExperiment& e, const Config& cfg,
                       const std::string& command);

/// {J_i, se, paths, seed, agent, config_digest}
void write_objective_report(const std::string& json_path, const ObjectiveEstimate& est, int agent,
                            uint64_t seed, const Config& cfg);

}  // namespace mfg
