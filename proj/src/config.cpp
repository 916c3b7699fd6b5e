#include "kadv/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace kadv {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& tok, int lineno) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": bad number '" + tok + "'");
    }
    if (pos != tok.size())
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": trailing junk in number '" + tok + "'");
    return v;
}

}  // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = std::string::npos;
        bool in_str = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_str = !in_str;
            if (line[i] == '#' && !in_str) {
                hash = i;
                break;
            }
        }
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": empty section name");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string raw = trim(line.substr(eq + 1));
        if (key.empty() || raw.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": empty key or value");
        std::string full = section.empty() ? key : section + "." + key;
        if (cfg.values_.count(full))
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": duplicate key '" + full + "'");

        Value v;
        if (raw.front() == '"') {
            if (raw.size() < 2 || raw.back() != '"')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unterminated string");
            v.kind = Value::Kind::string;
            v.str = raw.substr(1, raw.size() - 2);
        } else if (raw == "true" || raw == "false") {
            v.kind = Value::Kind::boolean;
            v.flag = raw == "true";
        } else if (raw.front() == '[') {
            if (raw.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unterminated array");
            v.kind = Value::Kind::array;
            std::string body = trim(raw.substr(1, raw.size() - 2));
            if (!body.empty()) {
                std::istringstream items(body);
                std::string tok;
                while (std::getline(items, tok, ','))
                    v.arr.push_back(parse_number(trim(tok), lineno));
            }
        } else {
            v.kind = Value::Kind::number;
            v.num = parse_number(raw, lineno);
        }
        cfg.values_.emplace(std::move(full), std::move(v));
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

bool Config::has(const std::string& key) const {
    return values_.count(key) != 0;
}

const Config::Value& Config::require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
}

double Config::get_double(const std::string& key) const {
    const Value& v = require(key);
    if (v.kind != Value::Kind::number)
        throw ConfigError("config key '" + key + "' is not a number");
    return v.num;
}

double Config::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long Config::get_long(const std::string& key) const {
    double v = get_double(key);
    long l = static_cast<long>(v);
    if (static_cast<double>(l) != v)
        throw ConfigError("config key '" + key + "' is not an integer");
    return l;
}

long Config::get_long(const std::string& key, long fallback) const {
    return has(key) ? get_long(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
    const Value& v = require(key);
    if (v.kind != Value::Kind::boolean)
        throw ConfigError("config key '" + key + "' is not a boolean");
    return v.flag;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::string Config::get_string(const std::string& key) const {
    const Value& v = require(key);
    if (v.kind != Value::Kind::string)
        throw ConfigError("config key '" + key + "' is not a string");
    return v.str;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

std::vector<double> Config::get_array(const std::string& key) const {
    const Value& v = require(key);
    if (v.kind != Value::Kind::array)
        throw ConfigError("config key '" + key + "' is not an array");
    return v.arr;
}

std::vector<double> Config::get_array(
    const std::string& key, const std::vector<double>& fallback) const {
    return has(key) ? get_array(key) : fallback;
}

std::vector<std::string> Config::keys() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& kv : values_) out.push_back(kv.first);
    return out;
}

}  // namespace kadv
