#pragma once
// Minimal TOML-subset config reader: [section] headers, key = value pairs,
// values are numbers, booleans, "strings", or flat arrays of numbers.
// Keys are exposed as "section.key".

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace kadv {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const;

    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_long(const std::string& key) const;
    long get_long(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key,
                           const std::string& fallback) const;
    std::vector<double> get_array(const std::string& key) const;
    std::vector<double> get_array(const std::string& key,
                                  const std::vector<double>& fallback) const;

    std::vector<std::string> keys() const;

  private:
    struct Value {
        enum class Kind { number, boolean, string, array } kind;
        double num = 0.0;
        bool flag = false;
        std::string str;
        std::vector<double> arr;
    };
    const Value& require(const std::string& key) const;
    std::map<std::string, Value> values_;
};

}  // namespace kadv
