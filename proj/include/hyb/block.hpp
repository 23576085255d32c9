#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "buffer_pool.hpp"
#include "serialization.hpp"
#include "work_queue.hpp"

// WORK_BLOCK / RESULT_BLOCK payload framing:
//
//   block_id u64 | item_count u32 | item_count x (sequence_index u64, item bytes)

namespace hyb {

inline constexpr std::size_t block_header_size = 12;
inline constexpr std::size_t block_item_overhead = 8;

struct BlockHeader {
  std::uint64_t block_id {0};
  std::uint32_t item_count {0};
};

inline void write_block_header(Bytes& out, BlockHeader h) {
  ByteWriter w(out);
  w.write(h.block_id);
  w.write(h.item_count);
}

inline void patch_item_count(Bytes& out, std::uint32_t count) {
  for(std::size_t i = 0; i < 4; ++i) {
    out[8 + i] = static_cast<std::byte>((count >> (8 * i)) & 0xFF);
  }
}

inline BlockHeader read_block_header(ByteReader& r) {
  BlockHeader h;
  h.block_id = r.read<std::uint64_t>();
  h.item_count = r.read<std::uint32_t>();
  return h;
}

// Procedure: pack_block
//
// Takes up to `batch` indices and serializes the corresponding items into the
// empty buffer until the next one would overflow its capacity. Indices that
// did not fit go back to the queue at high priority. Returns the packed
// indices in buffer order; an empty result means the queue was drained.
//
// Throws ItemTooLarge (after putting every taken index back) when even the
// first item does not fit into the empty buffer.
template <Serializable Item>
std::vector<std::size_t> pack_block(
  WorkQueue& queue,
  std::span<const Item> sequence,
  TransferBuffer& buffer,
  std::size_t batch
) {
  auto taken = queue.take(batch);
  buffer.bytes.clear();
  buffer.item_count = 0;
  if(taken.empty()) {
    return taken;
  }

  write_block_header(buffer.bytes, {buffer.block_id, 0});
  ByteWriter writer(buffer.bytes, buffer.capacity);

  std::size_t packed = 0;
  for(; packed < taken.size(); ++packed) {
    const auto& item = sequence[taken[packed]];
    if(block_item_overhead + serialized_size(item) > writer.remaining()) {
      break;
    }
    writer.write(static_cast<std::uint64_t>(taken[packed]));
    serialize(item, writer);
  }

  if(packed == 0) {
    queue.put_back(taken);
    buffer.bytes.clear();
    throw ItemTooLarge(
      "item " + std::to_string(taken.front()) + " needs " +
      std::to_string(block_header_size + block_item_overhead + serialized_size(sequence[taken.front()])) +
      " bytes, buffer capacity is " + std::to_string(buffer.capacity)
    );
  }

  queue.put_back(std::span<const std::size_t>(taken).subspan(packed));
  taken.resize(packed);
  buffer.item_count = static_cast<std::uint32_t>(packed);
  patch_item_count(buffer.bytes, buffer.item_count);
  return taken;
}

}  // end of namespace hyb ----------------------------------------------------
