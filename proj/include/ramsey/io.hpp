// io.hpp: number formatting, CSV tables, key=value run metadata and
// overwrite-safe file output.

#pragma once

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ramsey::io {

class OutputExists : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// 12 significant digits; scientific for |x| < 1e-3 or |x| > 1e4.
inline std::string format_number(double x) {
    if (x == 0.0) return "0";
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    const double a = std::abs(x);
    if (a >= 1e-3 && a <= 1e4) return fmt::format("{:.12g}", x);
    std::string s = fmt::format("{:.11e}", x);
    const auto e = s.find('e');
    std::string mant = s.substr(0, e);
    if (mant.find('.') != std::string::npos) {
        while (mant.back() == '0') mant.pop_back();
        if (mant.back() == '.') mant.pop_back();
    }
    return mant + s.substr(e);
}

inline std::string format_optional(const std::optional<double>& x) {
    return x ? format_number(*x) : std::string();
}

class CsvTable {
  public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
        if (header_.empty()) throw std::invalid_argument("CsvTable: empty header");
    }

    void add_row(std::vector<std::string> fields) {
        if (fields.size() != header_.size())
            throw std::invalid_argument("CsvTable: row has " + std::to_string(fields.size()) +
                                        " fields, header has " + std::to_string(header_.size()));
        rows_.push_back(std::move(fields));
    }

    std::size_t size() const noexcept { return rows_.size(); }

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& f) {
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (i) out += ',';
                out += quote(f[i]);
            }
            out += "\r\n";
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

  private:
    static std::string quote(const std::string& s) {
        if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + '"';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// Ordered key=value lines plus '#' comment lines. The key=value part is a
// valid config file for the command that produced it.
class MetaFile {
  public:
    void set(const std::string& key, const std::string& value) {
        for (auto& kv : entries_)
            if (kv.first == key) {
                kv.second = value;
                return;
            }
        entries_.emplace_back(key, value);
    }
    // Shortest representation that parses back to the same double.
    void set(const std::string& key, double value) { set(key, fmt::format("{}", value)); }
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }
    void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }

    void comment(const std::string& text) { comments_.push_back(text); }

    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
        return entries_;
    }

    std::string str() const {
        std::string out;
        for (const auto& c : comments_) out += "# " + c + "\n";
        for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
        return out;
    }

  private:
    std::vector<std::string> comments_;
    std::vector<std::pair<std::string, std::string>> entries_;
};

// Reads key=value lines; blank lines and lines starting with '#' are skipped.
inline std::vector<std::pair<std::string, std::string>> read_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file '" + path.string() + "'");
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) +
                                        ": expected key=value");
        kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

inline void ensure_writable(const std::filesystem::path& path, bool overwrite) {
    if (!overwrite && std::filesystem::exists(path))
        throw OutputExists("refusing to overwrite existing file '" + path.string() +
                           "' (pass --overwrite)");
}

inline void write_file(const std::filesystem::path& path, const std::string& content, bool overwrite) {
    ensure_writable(path, overwrite);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << content;
    out.close();
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace ramsey::io
