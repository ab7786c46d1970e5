#pragma once

#include "stentrom/core.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace stentrom::io {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw DataError("cannot open " + p.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// Writes to a sibling temporary and renames, so readers never see a torn file.
inline void write_file_atomic(const fs::path& p, const std::string& content) {
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("cannot write " + tmp.string());
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw DataError("write failed: " + tmp.string());
    }
    fs::rename(tmp, p);
}

}  // namespace stentrom::io
