#include "net/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace lsen {

namespace {

constexpr const char* kMagic = "LSENET-CHECKPOINT v1";

std::string shape_token(const Shape& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

Shape parse_shape_token(const std::string& tok) {
  Shape s;
  std::stringstream ss(tok);
  std::string part;
  while (std::getline(ss, part, 'x')) s.push_back(std::stoll(part));
  return s;
}

void write_config(std::ostream& os, const LsenetConfig& c) {
  os << "config.layers=" << c.layers << '\n';
  os << "config.channels=" << c.channels << '\n';
  os << "config.patch_size=" << c.patch_size << '\n';
  os << "config.in_channels=" << c.in_channels << '\n';
  os << "config.enable_mff=" << (c.enable_mff ? 1 : 0) << '\n';
  os << "config.enable_pie=" << (c.enable_pie ? 1 : 0) << '\n';
  os << "config.enable_crd=" << (c.enable_crd ? 1 : 0) << '\n';
  os << "config.seed=" << c.seed << '\n';
}

struct Header {
  LsenetConfig config;
  struct Entry {
    std::string name;
    Shape shape;
    int64_t offset = 0;
  };
  std::vector<Entry> entries;
  std::map<std::string, std::string> state;
  std::streampos payload_start = 0;
};

Header read_header(std::istream& is, const std::string& path) {
  Header h;
  std::string line;
  if (!std::getline(is, line) || line != kMagic)
    throw FormatError(path + ": not a checkpoint file (bad magic)");
  bool saw_end = false;
  while (std::getline(is, line)) {
    if (line == "end") {
      saw_end = true;
      break;
    }
    if (line.rfind("tensor ", 0) == 0) {
      std::istringstream ls(line.substr(7));
      Header::Entry e;
      std::string shape_tok;
      ls >> e.name >> shape_tok >> e.offset;
      if (ls.fail()) throw FormatError(path + ": malformed tensor line: " + line);
      e.shape = parse_shape_token(shape_tok);
      h.entries.push_back(std::move(e));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path + ": malformed header line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key.rfind("config.", 0) == 0) {
      const std::string field = key.substr(7);
      LsenetConfig& c = h.config;
      if (field == "layers") c.layers = std::stoi(value);
      else if (field == "channels") c.channels = std::stoi(value);
      else if (field == "patch_size") c.patch_size = std::stoi(value);
      else if (field == "in_channels") c.in_channels = std::stoi(value);
      else if (field == "enable_mff") c.enable_mff = value != "0";
      else if (field == "enable_pie") c.enable_pie = value != "0";
      else if (field == "enable_crd") c.enable_crd = value != "0";
      else if (field == "seed") c.seed = std::stoull(value);
      else throw FormatError(path + ": unknown config field '" + field + "'");
    } else if (key.rfind("state.", 0) == 0) {
      h.state[key.substr(6)] = value;
    } else {
      throw FormatError(path + ": unknown header key '" + key + "'");
    }
  }
  if (!saw_end) throw FormatError(path + ": truncated header (no 'end')");
  h.payload_start = is.tellg();
  return h;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, const LsenetModel<T>& model,
                     const std::vector<ParamRef<T>>& extra_tensors,
                     const std::map<std::string, std::string>& state) {
  std::vector<ParamRef<T>> all = model.parameters();
  all.insert(all.end(), extra_tensors.begin(), extra_tensors.end());

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write checkpoint: " + path);
  os << kMagic << '\n';
  write_config(os, model.config);
  int64_t offset = 0;
  for (const auto& p : all) {
    os << "tensor " << p.name << ' ' << shape_token(p.tensor.shape()) << ' ' << offset << '\n';
    offset += p.tensor.numel() * static_cast<int64_t>(sizeof(float));
  }
  for (const auto& [k, v] : state) os << "state." << k << '=' << v << '\n';
  os << "end\n";

  std::vector<float> buf;
  for (const auto& p : all) {
    buf.resize(static_cast<size_t>(p.tensor.numel()));
    const T* src = p.tensor.data();
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(src[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!os) throw FormatError("short write on checkpoint: " + path);
}

template <typename T>
std::map<std::string, std::string> load_checkpoint(const std::string& path,
                                                   const LsenetModel<T>& model,
                                                   const std::vector<ParamRef<T>>& extra) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot read checkpoint: " + path);
  Header h = read_header(is, path);

  if (!(h.config == model.config)) {
    // Name the first divergent field for the caller's diagnostics.
    const LsenetConfig &a = h.config, &b = model.config;
    std::string field = "seed";
    if (a.layers != b.layers) field = "layers";
    else if (a.channels != b.channels) field = "channels";
    else if (a.patch_size != b.patch_size) field = "patch_size";
    else if (a.in_channels != b.in_channels) field = "in_channels";
    else if (a.enable_mff != b.enable_mff) field = "enable_mff";
    else if (a.enable_pie != b.enable_pie) field = "enable_pie";
    else if (a.enable_crd != b.enable_crd) field = "enable_crd";
    throw ArgumentError(path + ": checkpoint/config mismatch on field '" + field + "'");
  }

  std::vector<ParamRef<T>> all = model.parameters();
  all.insert(all.end(), extra.begin(), extra.end());
  if (all.size() != h.entries.size())
    throw FormatError(path + ": checkpoint holds " + std::to_string(h.entries.size()) +
                      " tensors, model expects " + std::to_string(all.size()));

  std::vector<float> buf;
  for (size_t i = 0; i < all.size(); ++i) {
    const auto& e = h.entries[i];
    const auto& p = all[i];
    if (e.name != p.name)
      throw FormatError(path + ": tensor #" + std::to_string(i) + " is '" + e.name +
                        "', expected '" + p.name + "'");
    if (e.shape != p.tensor.shape())
      throw FormatError(path + ": tensor '" + e.name + "' has shape " + shape_str(e.shape) +
                        ", expected " + shape_str(p.tensor.shape()));
    buf.resize(static_cast<size_t>(p.tensor.numel()));
    is.seekg(h.payload_start + std::streamoff(e.offset));
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!is) throw FormatError(path + ": truncated payload at tensor '" + e.name + "'");
    T* dst = p.tensor.data();
    for (size_t j = 0; j < buf.size(); ++j) dst[j] = static_cast<T>(buf[j]);
  }
  return h.state;
}

LsenetConfig read_checkpoint_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot read checkpoint: " + path);
  return read_header(is, path).config;
}

#define LSEN_INSTANTIATE(T)                                                              \
  template void save_checkpoint<T>(const std::string&, const LsenetModel<T>&,            \
                                   const std::vector<ParamRef<T>>&,                      \
                                   const std::map<std::string, std::string>&);           \
  template std::map<std::string, std::string> load_checkpoint<T>(                        \
      const std::string&, const LsenetModel<T>&, const std::vector<ParamRef<T>>&);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen
