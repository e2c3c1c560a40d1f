// SPDX-License-Identifier: Apache-2.0
#include "dmsd/kv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dmsd/errors.hpp"

namespace dmsd {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, int line, const char* what) {
    throw ConfigError("line " + std::to_string(line) + ": " + key + "=" + value + " is not " + what);
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key=value");
        const std::string key = trim(body.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key");
        if (kv.values_.count(key)) throw ConfigError("line " + std::to_string(line) + ": duplicate key " + key);
        kv.values_[key] = Entry{trim(body.substr(eq + 1)), line, false};
    }
    return kv;
}

const KeyValues::Entry* KeyValues::take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
}

void KeyValues::read(const std::string& key, std::size_t& out) {
    if (const Entry* e = take(key)) {
        std::size_t v = 0;
        const auto* end = e->value.data() + e->value.size();
        auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
        if (ec != std::errc{} || ptr != end) bad_value(key, e->value, e->line, "a non-negative integer");
        out = v;
    }
}

void KeyValues::read_u64(const std::string& key, std::uint64_t& out) {
    if (const Entry* e = take(key)) {
        std::uint64_t v = 0;
        const auto* end = e->value.data() + e->value.size();
        auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
        if (ec != std::errc{} || ptr != end) bad_value(key, e->value, e->line, "a non-negative integer");
        out = v;
    }
}

void KeyValues::read(const std::string& key, double& out) {
    if (const Entry* e = take(key)) {
        std::istringstream is(e->value);
        is.imbue(std::locale::classic());
        double v = 0.0;
        is >> v;
        if (!is || !is.eof() || !std::isfinite(v)) bad_value(key, e->value, e->line, "a finite number");
        out = v;
    }
}

void KeyValues::read(const std::string& key, bool& out) {
    if (const Entry* e = take(key)) {
        if (e->value == "true" || e->value == "1") {
            out = true;
        } else if (e->value == "false" || e->value == "0") {
            out = false;
        } else {
            bad_value(key, e->value, e->line, "a boolean (true/false)");
        }
    }
}

void KeyValues::read(const std::string& key, std::string& out) {
    if (const Entry* e = take(key)) out = e->value;
}

void KeyValues::finish() const {
    std::string unknown;
    for (const auto& [key, entry] : values_) {
        if (!entry.used) unknown += (unknown.empty() ? "" : ", ") + key + " (line " + std::to_string(entry.line) + ")";
    }
    if (!unknown.empty()) throw ConfigError("unknown keys: " + unknown);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace dmsd
