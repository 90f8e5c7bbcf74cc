#pragma once

#include <string>

#include "data/data.hpp"
#include "net/network.hpp"
#include "train/train.hpp"

namespace lsen {

// Merged view of every subsystem's configuration, parsed from a key=value
// file with [section] headers and/or programmatic overrides. Unknown keys
// are rejected. The root seed is split per subsystem in finalize().
struct RunConfig {
  LsenetConfig model;
  TrainConfig train;
  SynthConfig synth;
  int synth_train = 60, synth_val = 10, synth_test = 20;
  bool synthetic = false;
  std::string data_root;
  std::string out_dir = "out";
  uint64_t seed = 0;
  int threads = 0;  // 0: hardware default

  // Dotted keys: "model.layers", "train.lr0", "synth.size", "run.seed", ...
  void set(const std::string& key, const std::string& value);

  // Parses a config file; errors carry file:line context.
  static RunConfig load_file(const std::string& path);

  // Derives subsystem seeds from the root seed and validates every section.
  void finalize();

  // Canonical serialization (the provenance echo written to output dirs).
  std::string echo() const;
};

}  // namespace lsen
