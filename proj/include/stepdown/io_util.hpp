#pragma once

// Small text-format helpers shared by the cohort CSV files, the flat
// key=value configuration files, and the output writers.  All numeric output
// goes through fmt_double so files are byte-stable across runs.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stepdown {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(context + ": cannot parse '" + s + "' as a number");
    }
}

inline long parse_long(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(context + ": cannot parse '" + s + "' as an integer");
    }
}

// Reads a whole text file; throws with the path on failure.
inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Atomic whole-file write: write to a sibling temp file, then rename.
inline void write_text_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// FNV-1a 64-bit digest, used for manifest input/output fingerprints.
inline uint64_t fnv1a64(const std::string& data) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& data) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

// Flat key = value configuration file.  '#' starts a comment, blank lines
// are skipped, later keys override earlier ones.
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig from_file(const std::filesystem::path& path) {
        return from_string(read_text_file(path), path.string());
    }

    static KvConfig from_string(const std::string& text, const std::string& context = "<config>") {
        KvConfig cfg;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError(context + ":" + std::to_string(lineno) + ": expected key=value");
            cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : parse_double(it->second, "config key " + key);
    }

    long get_long(const std::string& key, long fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : parse_long(it->second, "config key " + key);
    }

    std::vector<double> get_doubles(const std::string& key) const {
        std::vector<double> out;
        const auto it = values_.find(key);
        if (it == values_.end()) return out;
        for (const auto& tok : split_csv_line(it->second))
            out.push_back(parse_double(trim(tok), "config key " + key));
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

    // Canonical serialization (sorted keys) so manifests are stable.
    std::string to_string() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace stepdown
