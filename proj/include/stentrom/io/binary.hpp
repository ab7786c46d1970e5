#pragma once

// Little-endian binary read/write helpers used by every on-disk container.

#include "stentrom/core.hpp"

#include <Eigen/Core>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace stentrom::io {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& os) : os_(os) {}

    void magic(std::string_view m) { os_.write(m.data(), static_cast<std::streamsize>(m.size())); }

    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    void put_string(const std::string& s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    void put_vector(const Eigen::VectorXd& v) {
        put<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
        os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }

    void put_matrix(const Eigen::MatrixXd& m) {
        put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
        put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
        // column-major, as stored by Eigen
        os_.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }

    void check() const {
        if (!os_) throw DataError("write failed");
    }

private:
    std::ostream& os_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& is) : is_(is) {}

    void expect_magic(std::string_view m) {
        std::string buf(m.size(), '\0');
        is_.read(buf.data(), static_cast<std::streamsize>(m.size()));
        if (!is_ || buf != m) throw DataError("bad magic: expected '" + std::string(m) + "'");
    }

    template <typename T>
    T get() {
        T v{};
        is_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!is_) throw DataError("unexpected end of binary stream");
        return v;
    }

    std::string get_string() {
        const auto n = get<std::uint32_t>();
        std::string s(n, '\0');
        is_.read(s.data(), n);
        if (!is_) throw DataError("unexpected end of binary stream");
        return s;
    }

    Eigen::VectorXd get_vector() {
        const auto n = get<std::uint64_t>();
        if (n > (1ull << 32)) throw DataError("implausible vector length");
        Eigen::VectorXd v(static_cast<Index>(n));
        is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!is_) throw DataError("unexpected end of binary stream");
        return v;
    }

    Eigen::MatrixXd get_matrix() {
        const auto r = get<std::uint64_t>();
        const auto c = get<std::uint64_t>();
        if (r * c > (1ull << 32)) throw DataError("implausible matrix size");
        Eigen::MatrixXd m(static_cast<Index>(r), static_cast<Index>(c));
        is_.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(r * c * sizeof(double)));
        if (!is_) throw DataError("unexpected end of binary stream");
        return m;
    }

private:
    std::istream& is_;
};

}  // namespace stentrom::io
