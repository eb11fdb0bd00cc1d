#pragma once

#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cara/errors.hpp"
#include "cara/numeric.hpp"

namespace cara::io {

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex_digest(std::string_view data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::uint64_t h = fnv1a(data);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

/// Comma-separated output with an optional `# config_digest=` first line,
/// a mandatory header row and round-trip number formatting. Lines end in LF.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, const std::vector<std::string>& header, std::string_view digest = {})
        : out_(out), width_(header.size()) {
        if (!digest.empty()) out_ << "# config_digest=" << digest << '\n';
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    void row(std::initializer_list<double> values) { row(std::vector<double>(values)); }
    void row(const std::vector<double>& values) {
        if (values.size() != width_) throw ParamError("csv: row width does not match header");
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << numeric::format_double(values[i]);
        out_ << '\n';
    }
    /// Mixed row: leading text cells followed by numbers.
    void row(const std::vector<std::string>& text, const std::vector<double>& values) {
        if (text.size() + values.size() != width_) throw ParamError("csv: row width does not match header");
        std::size_t col = 0;
        for (const auto& t : text) out_ << (col++ ? "," : "") << t;
        for (double v : values) out_ << (col++ ? "," : "") << numeric::format_double(v);
        out_ << '\n';
    }

private:
    std::ostream& out_;
    std::size_t width_;
};

inline std::ofstream open_output(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open output file " + path);
    return f;
}

}  // namespace cara::io
