// SPDX-License-Identifier: Apache-2.0
#include "dmsd/metrics.hpp"

#include <cmath>

#include "dmsd/errors.hpp"
#include "json.hpp"

namespace dmsd {

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double read_number(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::nan("") : v.get<double>();
}

}  // namespace

std::string to_json_line(const MetricsRecord& r) {
    nlohmann::ordered_json j;
    j["stage"] = r.stage;
    j["episode"] = r.episode;
    j["L_con"] = number(r.l_con);
    j["L_meta"] = number(r.l_meta);
    j["L_super"] = number(r.l_super);
    j["L_m"] = number(r.l_m);
    j["L_s"] = number(r.l_s);
    j["total"] = number(r.total);
    if (r.eval_accuracy) j["eval_accuracy"] = number(*r.eval_accuracy);
    if (r.eval_ci95) j["eval_ci95"] = number(*r.eval_ci95);
    if (r.wall_time) j["wall_time"] = *r.wall_time;
    if (r.error) j["error"] = *r.error;
    return j.dump();
}

MetricsRecord parse_json_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        MetricsRecord r;
        r.stage = j.at("stage").get<std::string>();
        r.episode = j.at("episode").get<std::size_t>();
        r.l_con = read_number(j, "L_con");
        r.l_meta = read_number(j, "L_meta");
        r.l_super = read_number(j, "L_super");
        r.l_m = read_number(j, "L_m");
        r.l_s = read_number(j, "L_s");
        r.total = read_number(j, "total");
        if (j.contains("eval_accuracy")) r.eval_accuracy = read_number(j, "eval_accuracy");
        if (j.contains("eval_ci95")) r.eval_ci95 = read_number(j, "eval_ci95");
        if (j.contains("wall_time")) r.wall_time = j.at("wall_time").get<double>();
        if (j.contains("error")) r.error = j.at("error").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("metrics line: ") + e.what());
    }
}

MetricsSink::MetricsSink(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw UsageError("cannot open metrics file " + path);
}

void MetricsSink::write(const MetricsRecord& r) {
    records_.push_back(r);
    if (out_.is_open()) {
        out_ << to_json_line(r) << '\n';
        out_.flush();
    }
}

}  // namespace dmsd
