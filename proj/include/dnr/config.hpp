#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dnr/errors.hpp"

namespace dnr {

/// Key = value entries of one [section] of the experiment file, with source
/// line numbers kept for error messages.
struct ConfigSection {
    std::map<std::string, std::string> kv;
    std::map<std::string, int> lines;

    bool has(const std::string& key) const { return kv.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback = "") const {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        try {
            size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("line " + std::to_string(lines.at(key)) + ": key '" +
                              key + "' is not a number: '" + it->second + "'");
        }
    }

    int get_int(const std::string& key, int fallback) const {
        return static_cast<int>(get_double(key, fallback));
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
        if (it->second == "false" || it->second == "0" || it->second == "no")
            return false;
        throw ConfigError("line " + std::to_string(lines.at(key)) + ": key '" + key +
                          "' is not a boolean: '" + it->second + "'");
    }

    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        std::vector<double> out;
        std::stringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                out.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw ConfigError("line " + std::to_string(lines.at(key)) +
                                  ": bad number '" + tok + "' in list '" + key + "'");
            }
        }
        return out;
    }

    /// Semicolon-separated tuples of comma-separated numbers.
    std::vector<std::vector<double>> get_tuples(const std::string& key) const {
        std::vector<std::vector<double>> out;
        auto it = kv.find(key);
        if (it == kv.end()) return out;
        std::stringstream ss(it->second);
        std::string tup;
        while (std::getline(ss, tup, ';')) {
            std::vector<double> t;
            std::stringstream ts(tup);
            std::string tok;
            while (std::getline(ts, tok, ',')) {
                try {
                    t.push_back(std::stod(tok));
                } catch (const std::exception&) {
                    throw ConfigError("line " + std::to_string(lines.at(key)) +
                                      ": bad tuple entry '" + tok + "' in '" + key +
                                      "'");
                }
            }
            if (!t.empty()) out.push_back(std::move(t));
        }
        return out;
    }
};

/// Structured text experiment file: [section] headers, key = value lines,
/// '#' comments.  No environment lookups; everything an experiment needs is
/// in the file.
struct Config {
    std::map<std::string, ConfigSection> sections;
    std::string path;

    bool has(const std::string& s) const { return sections.count(s) > 0; }

    const ConfigSection& section(const std::string& s) const {
        static const ConfigSection empty;
        auto it = sections.find(s);
        return it == sections.end() ? empty : it->second;
    }

    const ConfigSection& require(const std::string& s) const {
        auto it = sections.find(s);
        if (it == sections.end())
            throw ConfigError(path + ": missing required section [" + s + "]");
        return it->second;
    }
};

namespace detail {
inline std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}
}  // namespace detail

inline Config parse_config_text(const std::string& text, const std::string& path) {
    Config cfg;
    cfg.path = path;
    std::istringstream in(text);
    std::string line, current;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": unterminated section header");
            current = detail::trim(line.substr(1, line.size() - 2));
            if (current.empty())
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": empty section name");
            cfg.sections[current];
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        if (current.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": key outside of any [section]");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        auto& sec = cfg.sections[current];
        sec.kv[key] = val;
        sec.lines[key] = lineno;
    }
    return cfg;
}

inline Config parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

}  // namespace dnr
