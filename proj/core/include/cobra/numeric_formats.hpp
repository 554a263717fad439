#pragma once

#include <cstdint>
#include <vector>

namespace cobra {

enum class StorageKind : int {
  kFp16 = 0,
  kInt8 = 1,
  kInt4 = 2,
};

const char* storage_kind_name(StorageKind k);
StorageKind storage_kind_from_name(std::string_view name);  // throws std::invalid_argument

struct StorageFormat {
  StorageKind kind = StorageKind::kFp16;
  double scale = 1.0;  // per-tensor symmetric scale; unused for FP16
};

int width_bits(StorageKind k);

// Bit position whose flip the attack targets by default. For FP16 this is
// the exponent MSB (bit 14), not the sign bit: a sign flip changes loss far
// less than a 2^16 scale explosion. INT8/INT4 use the two's-complement top
// bit. Overridable at the CLI.
int msb_position(StorageKind k);

// IEEE-754 binary16 <-> double, exact over the full 2^16 pattern space
// (subnormals, infinities, NaN). Encoding rounds to nearest-even.
std::uint16_t fp16_encode(double value);
double fp16_decode(std::uint16_t bits);

// One storage word as an unsigned value: u16 bit pattern for FP16, one byte
// for INT8, one nibble for INT4.
std::uint16_t flip_bit_in_word(std::uint16_t word, int bit, StorageKind kind);

double decode_word(std::uint16_t word, const StorageFormat& fmt);

// Encoded payload for one tensor. INT4 packs two words per byte, low nibble
// = even index; word addressing stays per-value.
struct EncodedWords {
  StorageFormat fmt;
  std::size_t count = 0;           // number of values
  std::vector<std::uint8_t> bytes; // raw payload, little-endian words

  std::uint16_t word(std::size_t index) const;
  void set_word(std::size_t index, std::uint16_t value);
  void xor_word(std::size_t index, std::uint16_t mask);
};

// Quantized kinds pick scale = max|w| / (2^(width-1) - 1); all-zero tensors
// get scale 1. Throws std::invalid_argument when a quantized encode sees a
// non-finite value. FP16 encodes non-finite values faithfully.
EncodedWords encode_values(const std::vector<double>& values, StorageKind kind);

std::vector<double> decode_values(const EncodedWords& words);

}  // namespace cobra
