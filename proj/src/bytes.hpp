// SPDX-License-Identifier: Apache-2.0
// Little-endian byte encoding shared by the binary file formats.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dmsd/errors.hpp"

namespace dmsd::bytes {

class Writer {
public:
    void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }

    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked cursor. Every failure reports the offset it happened at.
class Reader {
public:
    Reader(std::span<const std::uint8_t> data, std::string what) : data_(data), what_(std::move(what)) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    std::string raw(std::size_t n) {
        need(n, "bytes");
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1, "u8")); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2, "u16")); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4, "u32")); }
    std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(get(4, "i32"))); }
    std::uint64_t u64() { return get(8, "u64"); }
    float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get(4, "f32"))); }

    /// Throws FormatError when fewer than n bytes remain.
    void need(std::size_t n, const char* field) const {
        if (remaining() < n) {
            throw FormatError(what_ + ": truncated at offset " + std::to_string(pos_) + " reading " + field +
                              " (need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()) + ")");
        }
    }

    [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
        throw FormatError(what_ + ": " + msg + " at offset " + std::to_string(at));
    }

    void expect_end() const {
        if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes", pos_);
    }

private:
    std::uint64_t get(int n, const char* field) {
        need(static_cast<std::size_t>(n), field);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);

}  // namespace dmsd::bytes
