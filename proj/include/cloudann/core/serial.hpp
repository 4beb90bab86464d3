// Copyright 2026-present the cloudann project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cloudann {

// Little-endian raw readers/writers for the index metadata blobs.
struct BinWriter {
    std::ostream& out;

    template <typename T>
    void
    pod(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        out.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    void
    u32(std::uint32_t v) {
        pod(v);
    }

    void
    u64(std::uint64_t v) {
        pod(v);
    }

    void
    f64(double v) {
        pod(v);
    }

    void
    str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    template <typename T>
    void
    vec(const std::vector<T>& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        u64(v.size());
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(T)));
    }
};

struct BinReader {
    std::istream& in;

    template <typename T>
    T
    pod() {
        static_assert(std::is_trivially_copyable_v<T>);
        T v{};
        in.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (static_cast<std::size_t>(in.gcount()) != sizeof(T)) {
            throw std::runtime_error("truncated metadata blob");
        }
        return v;
    }

    std::uint32_t
    u32() {
        return pod<std::uint32_t>();
    }

    std::uint64_t
    u64() {
        return pod<std::uint64_t>();
    }

    double
    f64() {
        return pod<double>();
    }

    std::string
    str() {
        std::uint32_t n = u32();
        std::string s(n, '\0');
        in.read(s.data(), n);
        if (static_cast<std::uint32_t>(in.gcount()) != n) {
            throw std::runtime_error("truncated metadata blob");
        }
        return s;
    }

    template <typename T>
    std::vector<T>
    vec() {
        static_assert(std::is_trivially_copyable_v<T>);
        std::uint64_t n = u64();
        std::vector<T> v(n);
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(n * sizeof(T)));
        if (static_cast<std::uint64_t>(in.gcount()) != n * sizeof(T)) {
            throw std::runtime_error("truncated metadata blob");
        }
        return v;
    }
};

inline void
expect_magic(BinReader& r, const std::string& magic) {
    std::string got(magic.size(), '\0');
    r.in.read(got.data(), static_cast<std::streamsize>(magic.size()));
    if (got != magic) {
        throw std::runtime_error("bad metadata magic, expected " + magic);
    }
}

inline void
write_magic(BinWriter& w, const std::string& magic) {
    w.out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

}  // namespace cloudann
