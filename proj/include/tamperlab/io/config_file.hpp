#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace tamperlab {

// Minimal INI-style config: [section] headers, key = value lines, and
// '#' / ';' comments. Keys keep insertion-independent (sorted) order so that
// dump() is canonical and byte-stable.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::filesystem::path& path);
    static ConfigFile parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;

    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const;

    void set(const std::string& section, const std::string& key, const std::string& value);

    std::string dump() const;

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace tamperlab
