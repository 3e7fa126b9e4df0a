// config.hpp - sectioned key/value configuration (INI or JSON) and git-style hashing

#pragma once

#include "jch/linalg.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace jch {

using Json = nlohmann::json;

/// section -> key -> raw value. Keys that are never read are reported as
/// unknown, which catches misspelt fields.
class KeyValues {
public:
    void set(const std::string& section, const std::string& key, std::string value) {
        data_[section][key] = std::move(value);
    }

    std::optional<std::string> get(const std::string& section, const std::string& key) const {
        auto s = data_.find(section);
        if (s == data_.end()) return std::nullopt;
        auto k = s->second.find(key);
        if (k == s->second.end()) return std::nullopt;
        used_.insert(section + "." + key);
        return k->second;
    }

    bool has(const std::string& section, const std::string& key) const {
        auto s = data_.find(section);
        return s != data_.end() && s->second.count(key) > 0;
    }

    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& [sec, kv] : data_)
            for (const auto& [key, v] : kv)
                if (!used_.count(sec + "." + key)) out.push_back(sec + "." + key);
        return out;
    }

    bool empty() const { return data_.empty(); }

    static KeyValues from_ini(std::istream& is) {
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::ini_parser::read_ini(is, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
        KeyValues kv;
        for (const auto& [section, body] : tree) {
            if (body.empty()) throw ConfigError("config: key '" + section + "' outside a [section]");
            for (const auto& [key, leaf] : body) kv.set(section, key, leaf.get_value<std::string>());
        }
        return kv;
    }

    static KeyValues from_json(const Json& j) {
        if (!j.is_object()) throw ConfigError("config: JSON top level must be an object of sections");
        KeyValues kv;
        for (const auto& [section, body] : j.items()) {
            if (!body.is_object()) throw ConfigError("config: JSON section '" + section + "' must be an object");
            for (const auto& [key, v] : body.items()) kv.set(section, key, scalar_text(v));
        }
        return kv;
    }

    static KeyValues load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config file '" + path + "'");
        const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
        if (!json) return from_ini(in);
        try {
            return from_json(Json::parse(in));
        } catch (const Json::parse_error& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
    }

private:
    static std::string scalar_text(const Json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_array()) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + scalar_text(v[i]);
            return s;
        }
        return v.dump();
    }

    std::map<std::string, std::map<std::string, std::string>> data_;
    mutable std::set<std::string> used_;
};

// ------------------------------------------------------- value parsing

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::optional<double> to_double(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    std::size_t pos = 0;
    try {
        const double v = std::stod(t, &pos);
        if (pos != t.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

inline std::optional<long long> to_integer(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    std::size_t pos = 0;
    try {
        const long long v = std::stoll(t, &pos);
        if (pos != t.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

inline std::optional<bool> to_bool(const std::string& s) {
    const std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    return std::nullopt;
}

/// Reads typed fields out of a KeyValues, collecting "section.key: reason" problems.
class FieldReader {
public:
    FieldReader(const KeyValues& kv, std::vector<std::string>& problems) : kv_(kv), problems_(problems) {}

    void real(const std::string& sec, const std::string& key, double& out) {
        if (auto v = kv_.get(sec, key)) {
            if (auto d = to_double(*v)) out = *d;
            else bad(sec, key, "not a finite number");
        }
    }
    void reals(const std::string& sec, const std::string& key, std::vector<double>& out) {
        if (auto v = kv_.get(sec, key)) {
            std::vector<double> r;
            for (const auto& item : split_list(*v)) {
                if (auto d = to_double(item)) r.push_back(*d);
                else return bad(sec, key, "'" + item + "' is not a finite number");
            }
            out = std::move(r);
        }
    }
    template <class Int>
    void integer(const std::string& sec, const std::string& key, Int& out) {
        if (auto v = kv_.get(sec, key)) {
            if (auto d = to_integer(*v)) out = static_cast<Int>(*d);
            else bad(sec, key, "not an integer");
        }
    }
    void boolean(const std::string& sec, const std::string& key, bool& out) {
        if (auto v = kv_.get(sec, key)) {
            if (auto b = to_bool(*v)) out = *b;
            else bad(sec, key, "not a boolean");
        }
    }
    void text(const std::string& sec, const std::string& key, std::string& out) {
        if (auto v = kv_.get(sec, key)) out = trim(*v);
    }
    void bad(const std::string& sec, const std::string& key, const std::string& why) {
        problems_.push_back(sec + "." + key + ": " + why);
    }

private:
    const KeyValues& kv_;
    std::vector<std::string>& problems_;
};

// -------------------------------------------------------------- hashing

/// SHA-1 of "blob <size>\0<content>", as git hash-object prints it.
inline std::string git_blob_hash(const std::string& content) {
    const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1) {
        throw std::runtime_error("git_blob_hash: digest failed");
    }
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

}  // namespace jch
