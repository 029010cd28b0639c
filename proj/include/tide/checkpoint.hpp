#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tide/diffcore.hpp"

namespace tide {

// Checkpoints are a pair of files: `<stem>.json` lists tensor names and
// shapes in registration order plus the seed and a config hash; `<stem>.bin`
// holds the raw values as little-endian 64-bit floats, tensor after tensor
// in manifest order.

inline void save_checkpoint(const ParamStore& store, const std::string& stem,
                            std::uint64_t config_hash,
                            const nlohmann::ordered_json& config_echo = {}) {
  nlohmann::ordered_json manifest;
  manifest["format"] = "tide-checkpoint-v1";
  manifest["seed"] = store.seed();
  manifest["config_hash"] = config_hash;
  if (!config_echo.is_null() && !config_echo.empty()) {
    manifest["config"] = config_echo;
  }
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::string blob;
  for (const Param* p : store.entries()) {
    tensors.push_back({{"name", p->name},
                       {"rows", p->value.rows},
                       {"cols", p->value.cols}});
    for (double v : p->value.data) append_f64_le(blob, v);
  }
  manifest["tensors"] = tensors;

  std::ofstream mf(stem + ".json");
  if (!mf) throw std::runtime_error("cannot write " + stem + ".json");
  mf << manifest.dump(2) << "\n";

  std::ofstream bf(stem + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("cannot write " + stem + ".bin");
  bf.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

struct Checkpoint {
  ParamStore store;
  std::uint64_t config_hash = 0;
  nlohmann::ordered_json config;
};

inline Checkpoint load_checkpoint(const std::string& stem) {
  std::ifstream mf(stem + ".json");
  if (!mf) throw input_error("cannot open checkpoint manifest " + stem + ".json");
  nlohmann::ordered_json manifest;
  mf >> manifest;
  if (manifest.value("format", "") != "tide-checkpoint-v1") {
    throw input_error("unrecognized checkpoint format in " + stem + ".json");
  }

  std::ifstream bf(stem + ".bin", std::ios::binary);
  if (!bf) throw input_error("cannot open checkpoint blob " + stem + ".bin");
  std::string blob((std::istreambuf_iterator<char>(bf)),
                   std::istreambuf_iterator<char>());

  Checkpoint ck{ParamStore(manifest.at("seed").get<std::uint64_t>()),
                manifest.value("config_hash", std::uint64_t{0}),
                manifest.value("config", nlohmann::ordered_json{})};
  size_t off = 0;
  for (const auto& t : manifest.at("tensors")) {
    const int rows = t.at("rows").get<int>();
    const int cols = t.at("cols").get<int>();
    Tensor v(rows, cols);
    const size_t bytes = static_cast<size_t>(v.size()) * 8;
    if (off + bytes > blob.size()) {
      throw input_error("checkpoint blob truncated at tensor '" +
                        t.at("name").get<std::string>() + "'");
    }
    for (int i = 0; i < v.size(); ++i) {
      v.data[static_cast<size_t>(i)] = read_f64_le(
          reinterpret_cast<const unsigned char*>(blob.data() + off + 8 * i));
    }
    off += bytes;
    ck.store.add_values(t.at("name").get<std::string>(), std::move(v));
  }
  if (off != blob.size()) {
    throw input_error("checkpoint blob has trailing bytes");
  }
  return ck;
}

}  // namespace tide
