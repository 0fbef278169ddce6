#pragma once

#include "l3x/trainer.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace l3x {

// Bad command-line or configuration input (as opposed to a runtime failure).
class UsageError : public Error {
 public:
  using Error::Error;
};

// "key = value" lines; '#' starts a comment; values may be quoted. Later keys override earlier ones.
struct KeyValues {
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;
};

KeyValues parse_key_values(const std::string& text, const std::string& source = "<config>");
KeyValues read_key_values(const std::filesystem::path& path);

struct RunSettings {
  std::string preset = "desk";
  TrainConfig train = TrainConfig::desk();
  int checkpoint_every = 500;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunSettings&, const std::string&)> set;
  std::function<std::string(const RunSettings&)> get;
};

// Every recognized training key.
const std::vector<ConfigKey>& config_keys();

// Applies `preset` first (when present), then every other key. Unknown keys and malformed values
// raise UsageError naming the source line.
void apply_key_values(RunSettings& settings, const KeyValues& kv);
RunSettings settings_for_preset(const std::string& preset);

// Full key = value dump of the current settings.
std::string dump_settings(const RunSettings& settings);

}  // namespace l3x
