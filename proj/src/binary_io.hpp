#pragma once

// Little-endian primitive readers and writers shared by the checkpoint and dataset formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "pcnn/error.hpp"

namespace pcnn::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <class T>
void write_le(std::ostream& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.write(bytes, sizeof(T));
}

template <class T>
T read_le(std::istream& in, std::string_view what) {
    char bytes[sizeof(T)];
    if (!in.read(bytes, sizeof(T))) {
        throw FormatError(std::string(what) + ": truncated file");
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

inline void write_magic(std::ostream& out, std::string_view magic) {
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic, std::string_view what) {
    std::string got(magic.size(), '\0');
    if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
        throw FormatError(std::string(what) + ": bad magic bytes, expected \"" +
                          std::string(magic) + "\"");
    }
}

}  // namespace pcnn::detail
