#pragma once

#include <map>
#include <string>
#include <vector>

#include "net/network.hpp"

namespace lsen {

// Checkpoint file layout: a textual header (format line, config key-values,
// one `tensor <name> <d0xd1x...> <byte-offset>` line per payload entry,
// optional `state.*` key-values, then `end`) followed by a raw
// little-endian float32 payload. Saving the result of a load reproduces the
// file byte for byte.

template <typename T>
void save_checkpoint(const std::string& path, const LsenetModel<T>& model,
                     const std::vector<ParamRef<T>>& extra_tensors = {},
                     const std::map<std::string, std::string>& state = {});

// Loads parameter values into an already-built model (names and shapes must
// match the file exactly); fills `extra_tensors` the same way when given.
// Returns the state key-values (empty when the file carries none).
template <typename T>
std::map<std::string, std::string> load_checkpoint(const std::string& path,
                                                   const LsenetModel<T>& model,
                                                   const std::vector<ParamRef<T>>& extra = {});

// Reads only the embedded config, for building a model before loading.
LsenetConfig read_checkpoint_config(const std::string& path);

}  // namespace lsen
