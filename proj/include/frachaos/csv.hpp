#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "errors.hpp"

namespace frachaos {

/// 17 significant digits; refuses NaN and infinities.
inline std::string csv_number(double x) {
    if (!std::isfinite(x)) throw InvalidData("refusing to write a non-finite value to CSV");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Writes `content` to `path` through a sibling temp file and rename(2).
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os << content;
        os.flush();
        if (!os) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace frachaos
