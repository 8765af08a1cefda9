#include "subens/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "json.hpp"
#include "subens/error.hpp"

namespace subens {

using nlohmann::json;

IdxPaths parse_idx_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 == text.size() ||
      text.find(',', comma + 1) != std::string::npos) {
    throw ConfigError("expected 'images,labels', got '" + text + "'");
  }
  return {text.substr(0, comma), text.substr(comma + 1)};
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return value;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) out.push_back(parse_number<std::size_t>("list", item));
  return out;
}

}  // namespace

void apply_synthetic_spec(const std::string& text, SyntheticConfig& s, std::size_t& test_per_class) {
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("synthetic option '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "classes") {
      s.num_classes = parse_number<std::size_t>(key, value);
    } else if (key == "size") {
      s.image_size = parse_number<std::size_t>(key, value);
    } else if (key == "per_class") {
      s.per_class = parse_number<std::size_t>(key, value);
    } else if (key == "test_per_class") {
      test_per_class = parse_number<std::size_t>(key, value);
    } else if (key == "noise") {
      s.noise_std = parse_number<double>(key, value);
    } else if (key == "seed") {
      s.seed = parse_number<std::uint64_t>(key, value);
    } else {
      throw ConfigError("unknown synthetic option '" + key + "'");
    }
  }
}

void RunConfig::validate() const {
  if (arch.empty()) throw ConfigError("arch must not be empty");
  if (split.empty()) throw ConfigError("split must not be empty");
  if (mode != "sub" && mode != "deep") throw ConfigError("mode must be 'sub' or 'deep', got '" + mode + "'");
  if (members == 0) throw ConfigError("members must be >= 1");
  if (members_min == 0 || members_min > members) throw ConfigError("members_min must lie in [1, members]");
  if (runs == 0) throw ConfigError("runs must be >= 1");
  train.validate();
  if (synthetic.num_classes < 2 || synthetic.image_size < 4 || synthetic.per_class == 0 || test_per_class == 0) {
    throw ConfigError("synthetic data needs classes >= 2, size >= 4, per_class >= 1, test_per_class >= 1");
  }
  if (!(synthetic.noise_std >= 0.0)) throw ConfigError("synthetic noise must be >= 0");
  if (train_idx.has_value() != test_idx.has_value()) {
    throw ConfigError("--data-idx and --test-idx must be given together");
  }
  (void)parse_ood_kind(ood_kind);
  if (ood_members.empty()) throw ConfigError("ood_members must not be empty");
  for (std::size_t n : ood_members) {
    if (n == 0) throw ConfigError("ood_members entries must be >= 1");
  }
  if (calibration_bins == 0) throw ConfigError("calibration_bins must be >= 1");
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

void RunConfig::apply_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "arch") {
        arch = v.get<std::string>();
      } else if (key == "split") {
        split = v.is_string() ? v.get<std::string>() : std::to_string(v.get<std::size_t>());
      } else if (key == "mode") {
        mode = v.get<std::string>();
      } else if (key == "members") {
        members = v.get<std::size_t>();
      } else if (key == "members_min") {
        members_min = v.get<std::size_t>();
      } else if (key == "seed") {
        seed = v.get<std::uint64_t>();
      } else if (key == "runs") {
        runs = v.get<std::size_t>();
      } else if (key == "epochs") {
        train.epochs = v.get<std::size_t>();
      } else if (key == "batch_size") {
        train.batch_size = v.get<std::size_t>();
      } else if (key == "lr") {
        train.sgd.learning_rate = v.get<double>();
      } else if (key == "momentum") {
        train.sgd.momentum = v.get<double>();
      } else if (key == "data_idx") {
        train_idx = parse_idx_pair(v.get<std::string>());
      } else if (key == "test_idx") {
        test_idx = parse_idx_pair(v.get<std::string>());
      } else if (key == "ood_idx") {
        ood_idx = parse_idx_pair(v.get<std::string>());
      } else if (key == "synthetic") {
        apply_synthetic_spec(v.get<std::string>(), synthetic, test_per_class);
      } else if (key == "ood_kind") {
        ood_kind = v.get<std::string>();
      } else if (key == "ood_members") {
        ood_members = v.is_string() ? parse_size_list(v.get<std::string>()) : v.get<std::vector<std::size_t>>();
      } else if (key == "calibration_bins") {
        calibration_bins = v.get<std::size_t>();
      } else if (key == "out_dir") {
        out_dir = v.get<std::string>();
      } else if (key == "csv") {
        csv = v.get<std::string>();
      } else if (key == "model_dir") {
        model_dir = v.get<std::string>();
      } else if (key == "parallel") {
        parallel = v.get<bool>();
      } else if (key == "timing") {
        timing = v.get<bool>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
}

std::string RunConfig::data_json() const {
  json j;
  if (train_idx) {
    j["data_idx"] = train_idx->images + "," + train_idx->labels;
    j["test_idx"] = test_idx->images + "," + test_idx->labels;
  } else {
    j["synthetic"] = {{"classes", synthetic.num_classes},
                      {"size", synthetic.image_size},
                      {"per_class", synthetic.per_class},
                      {"test_per_class", test_per_class},
                      {"noise", synthetic.noise_std},
                      {"seed", synthetic.seed}};
  }
  return j.dump();
}

std::string default_out_dir() {
  const char* env = std::getenv("SUBENS_OUT_DIR");
  return env != nullptr && *env != '\0' ? std::string(env) : std::string(".");
}

}  // namespace subens
