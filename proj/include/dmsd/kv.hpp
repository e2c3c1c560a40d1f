// SPDX-License-Identifier: Apache-2.0
// key=value text files: one pair per line, '#' starts a comment.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dmsd {

/// Parsed key=value document. Readers consume keys as they are looked up;
/// finish() then rejects anything left over.
class KeyValues {
public:
    static KeyValues parse(const std::string& text);

    bool contains(const std::string& key) const { return values_.count(key) != 0; }

    void read(const std::string& key, std::size_t& out);
    void read_u64(const std::string& key, std::uint64_t& out);
    void read(const std::string& key, double& out);
    void read(const std::string& key, bool& out);
    void read(const std::string& key, std::string& out);

    /// Throws ConfigError naming every key that was never read.
    void finish() const;

private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };
    const Entry* take(const std::string& key);
    std::map<std::string, Entry> values_;
};

std::string read_text_file(const std::string& path);

}  // namespace dmsd
