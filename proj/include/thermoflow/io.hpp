#pragma once

// Deterministic artifact emission: CSV with shortest round-trip numeric
// formatting, and the JSON run manifest.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "thermoflow/common.hpp"

namespace thermoflow {

// shortest decimal that round-trips the double (<= 17 significant digits)
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

using CsvValue = std::variant<std::string, double, long long, std::size_t, bool>;

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<CsvValue> row) {
        if (row.size() != header_.size()) fail(errc::invalid_argument, "CSV row width mismatch");
        rows_.push_back(std::move(row));
    }

    std::string render() const {
        std::string out;
        for (std::size_t i = 0; i < header_.size(); ++i) {
            if (i) out.push_back(',');
            out += header_[i];
        }
        out.push_back('\n');
        for (const auto& row : rows_) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out.push_back(',');
                std::visit(
                    [&out](const auto& v) {
                        using T = std::decay_t<decltype(v)>;
                        if constexpr (std::is_same_v<T, std::string>)
                            out += v;
                        else if constexpr (std::is_same_v<T, double>)
                            out += format_double(v);
                        else if constexpr (std::is_same_v<T, bool>)
                            out += v ? "1" : "0";
                        else
                            out += std::to_string(v);
                    },
                    row[i]);
            }
            out.push_back('\n');
        }
        return out;
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) fail(errc::invalid_argument, "cannot write '" + path.string() + "'");
        const std::string text = render();
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<CsvValue>> rows_;
};

std::string sha256_hex(const std::string& bytes);  // defined by the CLI translation unit

struct RunManifest {
    std::string config_sha256;
    std::string command;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::int64_t duration_ms = 0;
    std::string tool_version = kVersion;

    void write(const std::filesystem::path& path) const {
        nlohmann::json j;
        j["config_sha256"] = config_sha256;
        j["command"] = command;
        if (seed)
            j["seed"] = *seed;
        else
            j["seed"] = nullptr;
        j["threads"] = threads;
        j["duration_ms"] = duration_ms;
        j["tool_version"] = tool_version;
        std::ofstream out(path, std::ios::binary);
        if (!out) fail(errc::invalid_argument, "cannot write '" + path.string() + "'");
        const std::string text = j.dump(2) + "\n";
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
    }
};

}  // namespace thermoflow
