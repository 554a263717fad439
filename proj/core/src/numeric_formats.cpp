#include "cobra/numeric_formats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cobra {

const char* storage_kind_name(StorageKind k) {
  switch (k) {
    case StorageKind::kFp16: return "fp16";
    case StorageKind::kInt8: return "int8";
    case StorageKind::kInt4: return "int4";
  }
  return "unknown";
}

StorageKind storage_kind_from_name(std::string_view name) {
  if (name == "fp16") return StorageKind::kFp16;
  if (name == "int8") return StorageKind::kInt8;
  if (name == "int4") return StorageKind::kInt4;
  throw std::invalid_argument("unknown storage format: " + std::string(name));
}

int width_bits(StorageKind k) {
  switch (k) {
    case StorageKind::kFp16: return 16;
    case StorageKind::kInt8: return 8;
    case StorageKind::kInt4: return 4;
  }
  return 0;
}

int msb_position(StorageKind k) {
  switch (k) {
    case StorageKind::kFp16: return 14;  // exponent MSB
    case StorageKind::kInt8: return 7;
    case StorageKind::kInt4: return 3;
  }
  return 0;
}

std::uint16_t fp16_encode(double value) {
  const bool negative = std::signbit(value);
  const std::uint16_t sign = negative ? 0x8000 : 0x0000;
  if (std::isnan(value)) return sign | 0x7e00;
  if (std::isinf(value)) return sign | 0x7c00;

  const double ax = std::abs(value);
  // Largest magnitude that rounds to a finite half is just under 65520
  // (= 2^15 * (2 - 2^-11)); 65520 itself ties to the even 2^16 and overflows.
  if (ax >= 65520.0) return sign | 0x7c00;
  if (ax == 0.0) return sign;

  int e = 0;
  std::frexp(ax, &e);  // ax = f * 2^e with f in [0.5, 1)
  e -= 1;              // ax = m * 2^e with m in [1, 2)

  if (e < -14) {
    // Subnormal: round ax / 2^-24 to the nearest integer (ties to even).
    // The scaling is exact, so no double rounding occurs.
    const double q = std::nearbyint(std::ldexp(ax, 24));
    const auto bits = static_cast<std::uint16_t>(q);  // q <= 1024
    return sign | bits;  // q == 1024 lands exactly on the smallest normal
  }

  const double mant = std::ldexp(ax, -e);  // [1, 2), exact scaling
  double sig = std::nearbyint(mant * 1024.0);
  if (sig >= 2048.0) {
    sig = 1024.0;
    e += 1;
  }
  if (e > 15) return sign | 0x7c00;
  const auto exp_field = static_cast<std::uint16_t>(e + 15);
  const auto mant_field = static_cast<std::uint16_t>(static_cast<int>(sig) - 1024);
  return sign | static_cast<std::uint16_t>(exp_field << 10) | mant_field;
}

double fp16_decode(std::uint16_t bits) {
  const int sign = (bits & 0x8000) ? -1 : 1;
  const int exp_field = (bits >> 10) & 0x1f;
  const int mant = bits & 0x3ff;
  if (exp_field == 31) {
    if (mant == 0) return sign * std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (exp_field == 0) return sign * std::ldexp(static_cast<double>(mant), -24);
  return sign * std::ldexp(1.0 + mant / 1024.0, exp_field - 15);
}

std::uint16_t flip_bit_in_word(std::uint16_t word, int bit, StorageKind kind) {
  if (bit < 0 || bit >= width_bits(kind)) {
    throw std::out_of_range("flip_bit_in_word: bit position out of range");
  }
  return word ^ static_cast<std::uint16_t>(1u << bit);
}

double decode_word(std::uint16_t word, const StorageFormat& fmt) {
  switch (fmt.kind) {
    case StorageKind::kFp16:
      return fp16_decode(word);
    case StorageKind::kInt8:
      return fmt.scale * static_cast<double>(static_cast<std::int8_t>(word & 0xff));
    case StorageKind::kInt4: {
      int q = word & 0x0f;
      if (q >= 8) q -= 16;  // sign-extend the nibble
      return fmt.scale * static_cast<double>(q);
    }
  }
  return 0.0;
}

std::uint16_t EncodedWords::word(std::size_t index) const {
  switch (fmt.kind) {
    case StorageKind::kFp16:
      return static_cast<std::uint16_t>(bytes[2 * index] |
                                        (static_cast<std::uint16_t>(bytes[2 * index + 1]) << 8));
    case StorageKind::kInt8:
      return bytes[index];
    case StorageKind::kInt4: {
      const std::uint8_t b = bytes[index / 2];
      return (index % 2 == 0) ? (b & 0x0f) : (b >> 4);
    }
  }
  return 0;
}

void EncodedWords::set_word(std::size_t index, std::uint16_t value) {
  switch (fmt.kind) {
    case StorageKind::kFp16:
      bytes[2 * index] = static_cast<std::uint8_t>(value & 0xff);
      bytes[2 * index + 1] = static_cast<std::uint8_t>(value >> 8);
      return;
    case StorageKind::kInt8:
      bytes[index] = static_cast<std::uint8_t>(value & 0xff);
      return;
    case StorageKind::kInt4: {
      std::uint8_t& b = bytes[index / 2];
      if (index % 2 == 0) {
        b = static_cast<std::uint8_t>((b & 0xf0) | (value & 0x0f));
      } else {
        b = static_cast<std::uint8_t>((b & 0x0f) | ((value & 0x0f) << 4));
      }
      return;
    }
  }
}

void EncodedWords::xor_word(std::size_t index, std::uint16_t mask) {
  set_word(index, static_cast<std::uint16_t>(word(index) ^ mask));
}

EncodedWords encode_values(const std::vector<double>& values, StorageKind kind) {
  EncodedWords out;
  out.fmt.kind = kind;
  out.count = values.size();

  if (kind == StorageKind::kFp16) {
    out.bytes.assign(2 * values.size(), 0);
    for (std::size_t i = 0; i < values.size(); ++i) out.set_word(i, fp16_encode(values[i]));
    return out;
  }

  double max_abs = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("encode_values: non-finite input to quantized encode");
    }
    max_abs = std::max(max_abs, std::abs(v));
  }
  const int qmax = kind == StorageKind::kInt8 ? 127 : 7;
  out.fmt.scale = max_abs > 0.0 ? max_abs / qmax : 1.0;

  const std::size_t nbytes =
      kind == StorageKind::kInt8 ? values.size() : (values.size() + 1) / 2;
  out.bytes.assign(nbytes, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    double q = std::nearbyint(values[i] / out.fmt.scale);
    q = std::min(std::max(q, static_cast<double>(-qmax)), static_cast<double>(qmax));
    const auto iq = static_cast<int>(q);
    out.set_word(i, static_cast<std::uint16_t>(iq & (kind == StorageKind::kInt8 ? 0xff : 0x0f)));
  }
  return out;
}

std::vector<double> decode_values(const EncodedWords& words) {
  std::vector<double> out(words.count);
  for (std::size_t i = 0; i < words.count; ++i) out[i] = decode_word(words.word(i), words.fmt);
  return out;
}

}  // namespace cobra
