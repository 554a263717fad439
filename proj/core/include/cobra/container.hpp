#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cobra/model.hpp"
#include "cobra/numeric_formats.hpp"

namespace cobra {

// CRC-64/XZ (ECMA-182 polynomial, reflected, init and xorout ~0).
std::uint64_t crc64(const std::uint8_t* data, std::size_t size);

struct EncodedTensor {
  std::string name;
  LayerType type = LayerType::kNorm;
  std::vector<std::size_t> shape;
  EncodedWords words;

  std::size_t cardinality() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }
};

// A model in its storage format: the substrate bit flips operate on.
struct EncodedModel {
  std::vector<EncodedTensor> tensors;

  EncodedTensor* find(std::string_view name);
  const EncodedTensor* find(std::string_view name) const;

  std::size_t total_bits() const;  // sum over tensors of cardinality * width

  // Model dimensions recovered from tensor names and shapes (the container
  // stores no separate config record). The seed of a loaded model is 0.
  ModelConfig infer_config() const;
};

EncodedModel encode_model(const ModelParams& params, StorageKind kind);
ModelParams decode_model(const EncodedModel& enc);

// Container file layout (all integers little-endian):
//   magic "COBR" | u32 version | u32 tensor_count
//   per tensor: u16 name_len, name | u8 layer_type | u8 storage_kind |
//               u8 ndim, u64 dims[] | u64 payload_offset | u64 payload_bytes
//   u64 payload_total | payload region | u64 crc64(payload region)
// Quantized tensor payloads start with their f64 scale; FP16 payloads are a
// bare u16 stream.
std::vector<std::uint8_t> serialize_container(const EncodedModel& model);
EncodedModel parse_container(const std::vector<std::uint8_t>& bytes);

void save_container(const EncodedModel& model, const std::filesystem::path& path);
EncodedModel load_container(const std::filesystem::path& path);

// Checksum of the serialized payload region; used by tests to prove that
// overlay evaluation never touches the base model.
std::uint64_t container_checksum(const EncodedModel& model);

class ContainerFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cobra
