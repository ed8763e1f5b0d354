#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "pimnet/errors.hpp"

namespace pimnet::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T to_little(T v)
{
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

/// Append-only little-endian byte sink.
class ByteWriter {
public:
    template <class T>
    void put(T v)
    {
        v = to_little(v);
        buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void bytes(std::string_view s) { buf_.append(s); }
    void u32_string(std::string_view s)
    {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        bytes(s);
    }
    const std::string& str() const { return buf_; }

private:
    std::string buf_;
};

/// Bounds-checked little-endian reader; `what` names the source in errors.
class ByteReader {
public:
    ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    template <class T>
    T get()
    {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return to_little(v);
    }
    std::string_view bytes(std::size_t n)
    {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string u32_string() { return std::string(bytes(get<std::uint32_t>())); }
    bool at_end() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }
    const std::string& what() const { return what_; }

private:
    void need(std::size_t n) const
    {
        if (data_.size() - pos_ < n)
            throw IoError(what_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " +
                          std::to_string(pos_) + ")");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

} // namespace pimnet::detail
