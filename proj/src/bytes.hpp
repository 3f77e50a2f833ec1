#pragma once

// Little-endian byte writer/reader shared by the container formats.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvlm/error.hpp"

namespace cvlm::detail {

class ByteWriter {
public:
    void magic(std::string_view m) { out_.insert(out_.end(), m.begin(), m.end()); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

    std::size_t size() const { return out_.size(); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    void expect_magic(std::string_view m) {
        need(m.size(), "magic");
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (data_[pos_ + i] != static_cast<std::uint8_t>(m[i])) {
                throw ParseError(pos_, "bad magic, expected \"" + std::string(m) + "\"");
            }
        }
        pos_ += m.size();
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return data_[pos_++];
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        auto v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::int16_t i16(const char* what) { return static_cast<std::int16_t>(u16(what)); }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::span<const std::uint8_t> bytes(std::size_t n, const char* what) {
        need(n, what);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw ParseError(pos_, std::string("truncated stream while reading ") + what + " (need " +
                                       std::to_string(n) + " bytes, have " + std::to_string(remaining()) + ")");
        }
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

}  // namespace cvlm::detail
