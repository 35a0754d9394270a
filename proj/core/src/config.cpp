#include "ecgtta/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ecgtta {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> kDefaults = {
      // preprocessing
      {"median_window_s", "0.6"},
      {"bp_low_hz", "0.5"},
      {"bp_high_hz", "40"},
      {"target_fs_hz", "100"},
      {"target_len", "3000"},
      {"spec_window", "64"},
      {"spec_hop", "32"},
      // augmentation policy
      {"aug.drop.prob", "0.3"},
      {"aug.drop.rate_min", "0"},
      {"aug.drop.rate_max", "0.1"},
      {"aug.mask.prob", "0.3"},
      {"aug.mask.frac_min", "0"},
      {"aug.mask.frac_max", "0.1"},
      {"aug.shift.prob", "0.3"},
      {"aug.shift.frac_min", "0"},
      {"aug.shift.frac_max", "0.1"},
      {"aug.sine.prob", "0.3"},
      {"aug.sine.amp_min", "0"},
      {"aug.sine.amp_max", "0.2"},
      {"aug.sine.freq_min", "0.1"},
      {"aug.sine.freq_max", "5"},
      {"aug.bandpass.prob", "0.3"},
      {"aug.bandpass.low_min", "0.5"},
      {"aug.bandpass.low_max", "10"},
      {"aug.bandpass.high_min", "20"},
      {"aug.bandpass.high_max", "45"},
      {"aug.cutmix.prob", "0.3"},
      {"aug.cutmix.frac_min", "0.1"},
      {"aug.cutmix.frac_max", "0.3"},
      {"aug.flip.prob", "0.15"},
      {"aug.noise.prob", "0.3"},
      {"aug.noise.snr_min", "10"},
      {"aug.noise.snr_max", "30"},
      {"aug.max_ops", "3"},
      // model
      {"model.d_model", "64"},
      {"model.n_heads", "2"},
      {"model.n_transformer_blocks", "2"},
      {"model.ffn_mult", "2"},
      {"model.patch_len", "50"},
      {"model.spec_channels", "8,16"},
      {"model.axial_blocks", "3"},
      {"model.axial_channels", "32"},
      {"model.n_classes", "4"},
      {"model.dropout", "0.1"},
      // training
      {"train.epochs", "10"},
      {"train.batch_size", "32"},
      {"train.lr", "0.001"},
      {"train.beta1", "0.9"},
      {"train.beta2", "0.999"},
      {"train.eps", "1e-8"},
      {"train.weight_decay", "0"},
      {"train.augment", "on"},
      {"train.balance", "none"},
      {"train.seed", "1"},
      // test-time augmentation
      {"tta.n_runs", "25"},
      {"tta.aggregation", "mode"},
      {"tta.seed", "1"},
      {"tta.noise.mu", "0"},
      {"tta.noise.sigma", "0"},
      // benchmark harness
      {"bench.repeats", "10"},
      {"bench.seed", "1"},
      {"bench.drop_grid", "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"},
      {"bench.mask_grid", "0,150,300,450,600,750,900,1050,1200,1350,1500"},
      {"bench.snr_grid", "30,25,20,15,10,5,0"},
      {"bench.tta_n_grid", "1,5,15,25,50"},
  };
  return kDefaults;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config::Config() : values_(defaults()) {}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void Config::set(const std::string& key, const std::string& value) {
  if (!defaults().count(key)) throw std::runtime_error("unknown config key: " + key);
  values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& Config::get_str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("unknown config key: " + key);
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string& s = get_str(key);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw std::runtime_error("config key " + key + ": not a number: '" + s + "'");
  return v;
}

std::int64_t Config::get_int(const std::string& key) const {
  const std::string& s = get_str(key);
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw std::runtime_error("config key " + key + ": not an integer: '" + s + "'");
  return v;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& s = get_str(key);
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw std::runtime_error("config key " + key + ": not a boolean: '" + s + "'");
}

std::vector<double> Config::get_list(const std::string& key) const {
  const std::string& s = get_str(key);
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    char* end = nullptr;
    double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0')
      throw std::runtime_error("config key " + key + ": bad list item '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace ecgtta
