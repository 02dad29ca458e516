// Line-oriented key=value configuration files (UTF-8, '#' comments).
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "deepf0/errors.hpp"
#include "deepf0/model.hpp"
#include "deepf0/trainer.hpp"

namespace deepf0 {

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& is, const std::string& origin) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const char* ws = " \t\r";
      s.erase(0, s.find_first_not_of(ws));
      if (auto last = s.find_last_not_of(ws); last != std::string::npos) {
        s.erase(last + 1);
      } else {
        s.clear();
      }
      return s;
    };
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValues load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open: " + path);
  return parse_key_values(is, path);
}

namespace detail {

inline std::size_t to_count(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size() || v < 0) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + value + "'");
  }
}

inline double to_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + value + "'");
  }
}

inline bool to_flag(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw ConfigError("config: bad flag for " + key + ": '" + value + "'");
}

inline std::vector<std::size_t> to_counts(const std::string& key,
                                          const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_count(key, item));
  return out;
}

}  // namespace detail

// Applies recognized keys to the model and training configs; unknown keys
// are an error so typos never pass silently.
inline void apply_config(const KeyValues& kv, DeepF0Config& model,
                         TrainConfig& train) {
  for (const auto& [key, value] : kv) {
    if (key == "frame_length") {
      model.frame_length = detail::to_count(key, value);
    } else if (key == "channels") {
      model.channels = detail::to_count(key, value);
    } else if (key == "first_kernel") {
      model.first_kernel = detail::to_count(key, value);
    } else if (key == "block_kernel") {
      model.block_kernel = detail::to_count(key, value);
    } else if (key == "dilations") {
      model.dilations = detail::to_counts(key, value);
    } else if (key == "pool") {
      model.pool = detail::to_count(key, value);
    } else if (key == "bins") {
      model.bins = detail::to_count(key, value);
    } else if (key == "use_residual") {
      model.use_residual = detail::to_flag(key, value);
    } else if (key == "use_dropout") {
      model.use_dropout = detail::to_flag(key, value);
    } else if (key == "dropout_rate") {
      model.dropout_rate = detail::to_real(key, value);
    } else if (key == "lr") {
      train.lr = detail::to_real(key, value);
    } else if (key == "patience_epochs") {
      train.patience_epochs = detail::to_count(key, value);
    } else if (key == "batch_size") {
      train.batch_size = detail::to_count(key, value);
    } else if (key == "max_epochs") {
      train.max_epochs = detail::to_count(key, value);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
}

}  // namespace deepf0
