// SPDX-License-Identifier: Apache-2.0
// JSONL metrics: one object per line.
#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace dmsd {

struct MetricsRecord {
    std::string stage;  ///< "pretrain", "metatrain" or "eval"
    std::size_t episode = 0;
    /// Unweighted per-term sums for the episode.
    double l_con = 0, l_meta = 0, l_super = 0, l_m = 0, l_s = 0;
    double total = 0;
    std::optional<double> eval_accuracy;
    std::optional<double> eval_ci95;
    std::optional<double> wall_time;
    std::optional<std::string> error;
};

/// Serialized form of one record (no trailing newline). Non-finite numbers become null.
std::string to_json_line(const MetricsRecord& r);
MetricsRecord parse_json_line(const std::string& line);

/// Collects records in memory and, when a path is given, appends them to a
/// JSONL file as they arrive.
class MetricsSink {
public:
    MetricsSink() = default;
    explicit MetricsSink(const std::string& path);

    void write(const MetricsRecord& r);
    const std::vector<MetricsRecord>& records() const { return records_; }

private:
    std::ofstream out_;
    std::vector<MetricsRecord> records_;
};

}  // namespace dmsd
