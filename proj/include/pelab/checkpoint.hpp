#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pelab/config_json.hpp"
#include "pelab/errors.hpp"
#include "pelab/microlm.hpp"

namespace pelab {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

// Checkpoint layout (all integers little-endian):
//   magic "PELBCKPT" | u32 version | u64 json_len | json bytes
//   u64 tensor_count
//   per tensor: u32 name_len | name | u8 element_width | u8 rank
//               u64 dims[rank] | raw element data
// The JSON part carries the model config, dtype tag, and the FIRE state in
// the same versioned document the fire module serializes; the binary part
// carries the remaining model tensors.
inline constexpr char kCheckpointMagic[8] = {'P', 'E', 'L', 'B',
                                             'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename V>
void write_raw(std::ofstream& out, const V& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(V));
}

template <typename V>
V read_raw(std::ifstream& in) {
  V value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(V));
  return value;
}

template <typename T>
const char* dtype_name() {
  if constexpr (sizeof(T) == 4)
    return "f32";
  else
    return "f64";
}

}  // namespace detail

template <typename T>
void save_checkpoint(ModelParams<T>& params,
                     const std::filesystem::path& path) {
  nlohmann::json fire = nlohmann::json::array();
  for (const auto& f : params.fire) fire.push_back(fire_params_to_json(f));
  nlohmann::json header{
      {"schema", "pelab_checkpoint"},
      {"version", kCheckpointVersion},
      {"dtype", detail::dtype_name<T>()},
      {"model", model_config_to_json(params.config)},
      {"fire", std::move(fire)},
  };
  const std::string json_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_raw(out, kCheckpointVersion);
  detail::write_raw(out, static_cast<std::uint64_t>(json_text.size()));
  out.write(json_text.data(),
            static_cast<std::streamsize>(json_text.size()));

  // model tensors only; the FIRE state lives in the JSON header
  auto refs = model_tensors(params);
  std::vector<TensorRef<T>> tensors;
  for (auto& ref : refs)
    if (ref.name.rfind("pe", 0) != 0) tensors.push_back(ref);

  detail::write_raw(out, static_cast<std::uint64_t>(tensors.size()));
  for (const auto& ref : tensors) {
    detail::write_raw(out, static_cast<std::uint32_t>(ref.name.size()));
    out.write(ref.name.data(), static_cast<std::streamsize>(ref.name.size()));
    detail::write_raw(out, static_cast<std::uint8_t>(sizeof(T)));
    detail::write_raw(out, static_cast<std::uint8_t>(ref.dims.size()));
    for (std::size_t d : ref.dims)
      detail::write_raw(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(ref.data),
              static_cast<std::streamsize>(ref.size * sizeof(T)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string checkpoint_dtype(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  const auto version = detail::read_raw<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version");
  const auto json_len = detail::read_raw<std::uint64_t>(in);
  std::string json_text(json_len, '\0');
  in.read(json_text.data(), static_cast<std::streamsize>(json_len));
  return nlohmann::json::parse(json_text).at("dtype").get<std::string>();
}

template <typename T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  const auto version = detail::read_raw<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version");
  const auto json_len = detail::read_raw<std::uint64_t>(in);
  std::string json_text(json_len, '\0');
  in.read(json_text.data(), static_cast<std::streamsize>(json_len));
  const nlohmann::json header = nlohmann::json::parse(json_text);
  if (header.at("dtype").get<std::string>() != detail::dtype_name<T>())
    throw IoError("checkpoint dtype mismatch (use checkpoint_dtype())");

  ModelParams<T> params;
  params.config = model_config_from_json(header.at("model"));
  // allocate shapes, then overwrite from the tensor section
  params = init_model_params<T>(params.config, /*seed=*/0);
  params.fire.clear();
  for (const auto& jf : header.at("fire"))
    params.fire.push_back(fire_params_from_json<T>(jf));

  auto refs = model_tensors(params);
  std::vector<TensorRef<T>*> by_order;
  for (auto& ref : refs)
    if (ref.name.rfind("pe", 0) != 0) by_order.push_back(&ref);

  const auto tensor_count = detail::read_raw<std::uint64_t>(in);
  if (tensor_count != by_order.size())
    throw IoError("checkpoint tensor count mismatch");
  for (std::uint64_t t = 0; t < tensor_count; ++t) {
    const auto name_len = detail::read_raw<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto width = detail::read_raw<std::uint8_t>(in);
    const auto rank = detail::read_raw<std::uint8_t>(in);
    std::uint64_t count = 1;
    for (std::uint8_t d = 0; d < rank; ++d)
      count *= detail::read_raw<std::uint64_t>(in);
    TensorRef<T>* ref = by_order[t];
    if (name != ref->name || width != sizeof(T) || count != ref->size)
      throw IoError("checkpoint tensor mismatch at '" + name + "'");
    in.read(reinterpret_cast<char*>(ref->data),
            static_cast<std::streamsize>(count * sizeof(T)));
  }
  if (!in) throw IoError("truncated checkpoint: " + path.string());
  return params;
}

}  // namespace pelab
