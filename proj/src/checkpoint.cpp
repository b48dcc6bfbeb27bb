#include "echofight/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "echofight/errors.hpp"

namespace echofight::nn {

namespace {
constexpr const char* kVersion = "ckpt-v1";

struct ManifestEntry {
  std::string name;
  Shape shape;
};

struct Manifest {
  CheckpointInfo info;
  std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("checkpoint: cannot open " + path);
  Manifest m;
  std::string line;
  bool version_ok = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "version") {
      std::string v;
      ss >> v;
      if (v != kVersion) throw ConfigError("checkpoint: unsupported version '" + v + "' in " + path);
      version_ok = true;
    } else if (key == "seed") {
      ss >> m.info.seed;
    } else if (key == "round") {
      ss >> m.info.round;
    } else if (key == "encoder") {
      ss >> m.info.encoder;
    } else if (key == "tensor") {
      ManifestEntry e;
      ss >> e.name;
      int d;
      while (ss >> d) e.shape.push_back(d);
      if (e.name.empty() || e.shape.empty())
        throw ConfigError("checkpoint: malformed tensor line in " + path);
      m.entries.push_back(std::move(e));
    } else {
      throw ConfigError("checkpoint: unknown manifest key '" + key + "' in " + path);
    }
  }
  if (!version_ok) throw ConfigError("checkpoint: missing version in " + path);
  return m;
}
}  // namespace

void save_checkpoint(const std::string& base, const ParamStore& params,
                     const CheckpointInfo& info) {
  std::ofstream mf(base + ".manifest");
  if (!mf) throw ConfigError("checkpoint: cannot write " + base + ".manifest");
  mf << "version " << kVersion << "\n";
  mf << "seed " << info.seed << "\n";
  mf << "round " << info.round << "\n";
  if (!info.encoder.empty()) mf << "encoder " << info.encoder << "\n";
  for (const auto& [name, t] : params) {
    mf << "tensor " << name;
    for (int d : t->shape) mf << " " << d;
    mf << "\n";
  }

  std::ofstream bf(base + ".bin", std::ios::binary);
  if (!bf) throw ConfigError("checkpoint: cannot write " + base + ".bin");
  std::vector<float> buf;
  for (const auto& [name, t] : params) {
    buf.assign(t->data.begin(), t->data.end());
    bf.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

CheckpointInfo load_checkpoint(const std::string& base, const ParamStore& params) {
  const Manifest m = read_manifest(base + ".manifest");

  if (m.entries.size() != params.size())
    throw ConfigError("checkpoint: " + base + " holds " + std::to_string(m.entries.size()) +
                      " tensors, model has " + std::to_string(params.size()));
  int64_t total = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = params[i];
    const ManifestEntry& e = m.entries[i];
    if (e.name != name)
      throw ConfigError("checkpoint: tensor " + std::to_string(i) + " is '" + e.name +
                        "', model expects '" + name + "'");
    if (e.shape != t->shape)
      throw ConfigError("checkpoint: shape mismatch for " + name + ": file " +
                        shape_str(e.shape) + ", model " + shape_str(t->shape));
    total += numel_of(e.shape);
  }

  std::ifstream bf(base + ".bin", std::ios::binary);
  if (!bf) throw ConfigError("checkpoint: cannot open " + base + ".bin");
  bf.seekg(0, std::ios::end);
  const int64_t bytes = bf.tellg();
  if (bytes != total * static_cast<int64_t>(sizeof(float)))
    throw ConfigError("checkpoint: " + base + ".bin holds " + std::to_string(bytes) +
                      " bytes, manifest implies " + std::to_string(total * sizeof(float)));
  bf.seekg(0);

  // All shapes verified; now fill.
  std::vector<float> buf;
  for (const auto& [name, t] : params) {
    buf.resize(t->data.size());
    bf.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!bf) throw ConfigError("checkpoint: truncated blob " + base + ".bin");
    for (size_t j = 0; j < buf.size(); ++j) t->data[j] = static_cast<double>(buf[j]);
    t->grad.clear();
  }
  return m.info;
}

CheckpointInfo peek_checkpoint(const std::string& base) {
  return read_manifest(base + ".manifest").info;
}

}  // namespace echofight::nn
