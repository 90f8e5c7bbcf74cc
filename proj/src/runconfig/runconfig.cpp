#include "runconfig/runconfig.hpp"

#include <fstream>
#include <sstream>

namespace lsen {

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ArgumentError("config: field '" + key + "' expects a boolean, got '" + v + "'");
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const int r = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ArgumentError("config: field '" + key + "' expects an integer, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const uint64_t r = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ArgumentError("config: field '" + key + "' expects an unsigned integer, got '" + v +
                        "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double r = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ArgumentError("config: field '" + key + "' expects a number, got '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "model.layers") model.layers = parse_int(key, value);
  else if (key == "model.channels") model.channels = parse_int(key, value);
  else if (key == "model.patch_size") model.patch_size = parse_int(key, value);
  else if (key == "model.in_channels") model.in_channels = parse_int(key, value);
  else if (key == "model.enable_mff") model.enable_mff = parse_bool(key, value);
  else if (key == "model.enable_pie") model.enable_pie = parse_bool(key, value);
  else if (key == "model.enable_crd") model.enable_crd = parse_bool(key, value);
  else if (key == "train.lr0") train.lr0 = parse_double(key, value);
  else if (key == "train.weight_decay") train.weight_decay = parse_double(key, value);
  else if (key == "train.epochs") train.epochs = parse_int(key, value);
  else if (key == "train.batch_size") train.batch_size = parse_int(key, value);
  else if (key == "train.poly_power") train.poly_power = parse_double(key, value);
  else if (key == "train.patience") train.patience = parse_int(key, value);
  else if (key == "train.beta1") train.beta1 = parse_double(key, value);
  else if (key == "train.beta2") train.beta2 = parse_double(key, value);
  else if (key == "train.eps") train.eps = parse_double(key, value);
  else if (key == "train.augment") train.augment = parse_bool(key, value);
  else if (key == "synth.size") synth.size = parse_int(key, value);
  else if (key == "synth.n_vessels_min") synth.n_vessels_min = parse_int(key, value);
  else if (key == "synth.n_vessels_max") synth.n_vessels_max = parse_int(key, value);
  else if (key == "synth.thickness_min") synth.thickness_min = parse_double(key, value);
  else if (key == "synth.thickness_max") synth.thickness_max = parse_double(key, value);
  else if (key == "synth.contrast_min") synth.contrast_min = parse_double(key, value);
  else if (key == "synth.contrast_max") synth.contrast_max = parse_double(key, value);
  else if (key == "synth.noise_sigma") synth.noise_sigma = parse_double(key, value);
  else if (key == "synth.low_contrast_fraction")
    synth.low_contrast_fraction = parse_double(key, value);
  else if (key == "synth.train_count") synth_train = parse_int(key, value);
  else if (key == "synth.val_count") synth_val = parse_int(key, value);
  else if (key == "synth.test_count") synth_test = parse_int(key, value);
  else if (key == "run.synthetic") synthetic = parse_bool(key, value);
  else if (key == "run.data_root") data_root = value;
  else if (key == "run.out_dir") out_dir = value;
  else if (key == "run.seed") seed = parse_u64(key, value);
  else if (key == "run.threads") threads = parse_int(key, value);
  else throw ArgumentError("config: unknown key '" + key + "'");
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("config: cannot open '" + path + "'");
  RunConfig cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw ArgumentError(path + ":" + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ArgumentError(path + ":" + std::to_string(lineno) + ": expected key=value, got '" +
                          t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const std::string dotted = section.empty() ? key : section + "." + key;
    try {
      cfg.set(dotted, value);
    } catch (const ArgumentError& e) {
      throw ArgumentError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

void RunConfig::finalize() {
  Rng root(seed);
  model.seed = root.split(1).next_u64();
  train.seed = root.split(2).next_u64();
  synth.seed = root.split(3).next_u64();
  model.validate();
  train.validate();
  synth.validate();
  LSEN_CHECK_ARG(synth_train >= 0 && synth_val >= 0 && synth_test >= 0,
                 "config: synthetic split counts must be non-negative");
  LSEN_CHECK_ARG(threads >= 0, "config: run.threads must be non-negative");
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  os << "[model]\n";
  os << "layers=" << model.layers << '\n';
  os << "channels=" << model.channels << '\n';
  os << "patch_size=" << model.patch_size << '\n';
  os << "in_channels=" << model.in_channels << '\n';
  os << "enable_mff=" << (model.enable_mff ? 1 : 0) << '\n';
  os << "enable_pie=" << (model.enable_pie ? 1 : 0) << '\n';
  os << "enable_crd=" << (model.enable_crd ? 1 : 0) << '\n';
  os << "[train]\n";
  os << "lr0=" << train.lr0 << '\n';
  os << "weight_decay=" << train.weight_decay << '\n';
  os << "epochs=" << train.epochs << '\n';
  os << "batch_size=" << train.batch_size << '\n';
  os << "poly_power=" << train.poly_power << '\n';
  os << "patience=" << train.patience << '\n';
  os << "beta1=" << train.beta1 << '\n';
  os << "beta2=" << train.beta2 << '\n';
  os << "eps=" << train.eps << '\n';
  os << "augment=" << (train.augment ? 1 : 0) << '\n';
  os << "[synth]\n";
  os << "size=" << synth.size << '\n';
  os << "n_vessels_min=" << synth.n_vessels_min << '\n';
  os << "n_vessels_max=" << synth.n_vessels_max << '\n';
  os << "thickness_min=" << synth.thickness_min << '\n';
  os << "thickness_max=" << synth.thickness_max << '\n';
  os << "contrast_min=" << synth.contrast_min << '\n';
  os << "contrast_max=" << synth.contrast_max << '\n';
  os << "noise_sigma=" << synth.noise_sigma << '\n';
  os << "low_contrast_fraction=" << synth.low_contrast_fraction << '\n';
  os << "train_count=" << synth_train << '\n';
  os << "val_count=" << synth_val << '\n';
  os << "test_count=" << synth_test << '\n';
  os << "[run]\n";
  os << "synthetic=" << (synthetic ? 1 : 0) << '\n';
  os << "data_root=" << data_root << '\n';
  os << "out_dir=" << out_dir << '\n';
  os << "seed=" << seed << '\n';
  os << "threads=" << threads << '\n';
  return os.str();
}

}  // namespace lsen
