#pragma once

#include <array>
#include <bit>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "error.hpp"

// Serialization trait and byte cursors.
//
// Every type that crosses the host/device boundary specializes
// hyb::serializer<T> with three static members:
//
//   template <typename Writer> static void serialize(Writer&, const T&);
//   template <typename Reader> static void deserialize(Reader&, T&);
//   static std::size_t size(const T&);
//
// Multi-byte values are little-endian and packed without padding, so a
// record of two 4-byte fields is exactly 8 bytes on the wire.

namespace hyb {

using Bytes = std::vector<std::byte>;

// ByteWriter
//
// Appends to a growable vector (optionally bounded by a byte limit) or writes
// into a fixed span. Writing past the limit throws CapacityExceeded and leaves
// the already written bytes untouched.
class ByteWriter {

  public:

    explicit ByteWriter(Bytes& out, std::size_t limit = SIZE_MAX) :
      _vec{&out}, _limit{limit} {}

    explicit ByteWriter(std::span<std::byte> region) :
      _span{region}, _limit{region.size()} {}

    void write_bytes(std::span<const std::byte> bytes) {
      if(bytes.size() > remaining()) {
        throw CapacityExceeded(
          "write of " + std::to_string(bytes.size()) + " bytes exceeds remaining capacity " +
          std::to_string(remaining())
        );
      }
      if(_vec) {
        _vec->insert(_vec->end(), bytes.begin(), bytes.end());
      }
      else if(!bytes.empty()) {
        std::memcpy(_span.data() + _cursor, bytes.data(), bytes.size());
      }
      _cursor += bytes.size();
    }

    template <typename T>
    requires std::is_arithmetic_v<T>
    void write(T value) {
      std::array<std::byte, sizeof(T)> raw;
      if constexpr (std::is_floating_point_v<T>) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        store_le(raw, std::bit_cast<U>(value));
      }
      else {
        store_le(raw, static_cast<std::make_unsigned_t<T>>(value));
      }
      write_bytes(raw);
    }

    // Bytes written through this writer.
    std::size_t cursor() const { return _cursor; }

    // For vector-backed writers the limit bounds the total vector size.
    std::size_t remaining() const {
      if(_vec) {
        return _limit > _vec->size() ? _limit - _vec->size() : 0;
      }
      return _span.size() - _cursor;
    }

  private:

    template <typename U>
    static void store_le(std::array<std::byte, sizeof(U)>& raw, U v) {
      for(std::size_t i = 0; i < sizeof(U); ++i) {
        raw[i] = static_cast<std::byte>((v >> (8 * i)) & 0xFF);
      }
    }

    Bytes* _vec {nullptr};
    std::span<std::byte> _span;
    std::size_t _cursor {0};
    std::size_t _limit {SIZE_MAX};
};

// ByteReader
class ByteReader {

  public:

    explicit ByteReader(std::span<const std::byte> region) : _region{region} {}

    void read_bytes(std::span<std::byte> out) {
      if(out.size() > remaining()) {
        throw TruncatedInput(
          "read of " + std::to_string(out.size()) + " bytes with only " +
          std::to_string(remaining()) + " remaining"
        );
      }
      if(!out.empty()) {
        std::memcpy(out.data(), _region.data() + _cursor, out.size());
      }
      _cursor += out.size();
    }

    template <typename T>
    requires std::is_arithmetic_v<T>
    T read() {
      std::array<std::byte, sizeof(T)> raw;
      read_bytes(raw);
      if constexpr (std::is_floating_point_v<T>) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        return std::bit_cast<T>(load_le<U>(raw));
      }
      else {
        return static_cast<T>(load_le<std::make_unsigned_t<T>>(raw));
      }
    }

    void skip(std::size_t n) {
      if(n > remaining()) {
        throw TruncatedInput("skip past end of region");
      }
      _cursor += n;
    }

    std::size_t cursor() const { return _cursor; }
    std::size_t remaining() const { return _region.size() - _cursor; }
    std::span<const std::byte> region() const { return _region; }

  private:

    template <typename U>
    static U load_le(const std::array<std::byte, sizeof(U)>& raw) {
      U v = 0;
      for(std::size_t i = 0; i < sizeof(U); ++i) {
        v |= static_cast<U>(std::to_integer<unsigned>(raw[i])) << (8 * i);
      }
      return v;
    }

    std::span<const std::byte> _region;
    std::size_t _cursor {0};
};

// ----------------------------------------------------------------------------
// serializer trait
// ----------------------------------------------------------------------------

template <typename T, typename = void>
struct serializer;

template <typename T>
struct serializer<T, std::enable_if_t<std::is_arithmetic_v<T>>> {

  template <typename Writer>
  static void serialize(Writer& w, const T& v) { w.write(v); }

  template <typename Reader>
  static void deserialize(Reader& r, T& v) { v = r.template read<T>(); }

  static constexpr std::size_t size(const T&) { return sizeof(T); }
};

template <typename T>
concept Serializable = requires(const T& cv, T& v, ByteWriter& w, ByteReader& r) {
  serializer<T>::serialize(w, cv);
  serializer<T>::deserialize(r, v);
  { serializer<T>::size(cv) } -> std::convertible_to<std::size_t>;
};

// Procedure: serialize
//
// Appends the serialized form of value and returns the number of bytes written.
template <Serializable T>
std::size_t serialize(const T& value, ByteWriter& writer) {
  const auto before = writer.cursor();
  serializer<T>::serialize(writer, value);
  return writer.cursor() - before;
}

// Procedure: deserialize_into
template <Serializable T>
void deserialize_into(ByteReader& reader, T& value) {
  serializer<T>::deserialize(reader, value);
}

// Procedure: deserialize
template <Serializable T>
requires std::default_initializable<T>
T deserialize(ByteReader& reader) {
  T value{};
  serializer<T>::deserialize(reader, value);
  return value;
}

// Procedure: serialized_size
template <Serializable T>
std::size_t serialized_size(const T& value) {
  return serializer<T>::size(value);
}

// Procedure: to_bytes
template <Serializable T>
Bytes to_bytes(const T& value) {
  Bytes out;
  out.reserve(serialized_size(value));
  ByteWriter w(out);
  serialize(value, w);
  return out;
}

// vector<T> of serializable elements: u64 count followed by the elements.
template <Serializable T>
struct serializer<std::vector<T>> {

  template <typename Writer>
  static void serialize(Writer& w, const std::vector<T>& v) {
    w.write(static_cast<std::uint64_t>(v.size()));
    for(const auto& e : v) {
      serializer<T>::serialize(w, e);
    }
  }

  template <typename Reader>
  static void deserialize(Reader& r, std::vector<T>& v) {
    const auto n = r.template read<std::uint64_t>();
    // elements are at least one byte wide, so a longer count is corrupt input
    if(n > r.remaining()) {
      throw TruncatedInput("vector length exceeds remaining input");
    }
    v.resize(static_cast<std::size_t>(n));
    for(auto& e : v) {
      serializer<T>::deserialize(r, e);
    }
  }

  static std::size_t size(const std::vector<T>& v) {
    std::size_t total = sizeof(std::uint64_t);
    for(const auto& e : v) {
      total += serializer<T>::size(e);
    }
    return total;
  }
};

}  // end of namespace hyb ----------------------------------------------------
