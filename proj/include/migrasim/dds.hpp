#ifndef MIGRASIM_DDS_HPP
#define MIGRASIM_DDS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "migrasim/machine.hpp"

namespace migrasim {

// Array with element i homed at nodelet i mod P.
class StripedArray {
 public:
  StripedArray() = default;
  static StripedArray allocate(Machine& m, std::uint64_t length, const std::string& name);

  std::uint64_t size() const { return length_; }
  std::uint32_t home(std::uint64_t i) const { return static_cast<std::uint32_t>(i % p_); }
  GlobalAddress addr(std::uint64_t i) const {
    return {home(i), base_[home(i)].word + i / p_};
  }
  // Number of elements homed at a nodelet, and the global index of its k-th
  // local element.
  std::uint64_t local_count(std::uint32_t nodelet) const {
    if (nodelet >= p_ || length_ == 0) return 0;
    return nodelet < length_ ? (length_ - nodelet - 1) / p_ + 1 : 0;
  }
  std::uint64_t local_index(std::uint32_t nodelet, std::uint64_t k) const {
    return static_cast<std::uint64_t>(nodelet) + k * p_;
  }

  // Host-side bulk init / extraction (setup and verification only).
  void fill(Machine& m, word_t v) const;
  std::vector<word_t> extract(const Machine& m) const;

 private:
  std::uint64_t length_ = 0;
  std::uint32_t p_ = 0;
  std::vector<GlobalAddress> base_;
};

// One full copy of the array on every nodelet; reads always hit the local
// copy, writes broadcast one put per copy.
class ReplicatedArray {
 public:
  ReplicatedArray() = default;
  static ReplicatedArray allocate(Machine& m, std::uint64_t length, const std::string& name);

  std::uint64_t size() const { return length_; }
  std::uint32_t copies() const { return p_; }
  GlobalAddress addr_on(std::uint32_t nodelet, std::uint64_t i) const {
    return base_[nodelet].plus(i);
  }
  GlobalAddress addr_local(const Ctx& ctx, std::uint64_t i) const {
    return addr_on(ctx.current_nodelet(), i);
  }

  void poke_all(Machine& m, std::uint64_t i, word_t v) const;

 private:
  std::uint64_t length_ = 0;
  std::uint32_t p_ = 0;
  std::vector<GlobalAddress> base_;
};

// Broadcast store: one remote-write packet per copy, no migration.
SimTask<void> replicated_write(Ctx& ctx, const ReplicatedArray& arr, std::uint64_t i, word_t v);

// Variable-length rows, row i fully resident on nodelet i mod P.
class JaggedLocalArray {
 public:
  JaggedLocalArray() = default;
  static JaggedLocalArray allocate(Machine& m, const std::vector<std::uint64_t>& row_lengths,
                                   const std::string& name);

  std::uint64_t rows() const { return row_base_.size(); }
  std::uint32_t home(std::uint64_t row) const { return static_cast<std::uint32_t>(row % p_); }
  std::uint64_t row_length(std::uint64_t row) const { return row_len_[row]; }
  GlobalAddress addr(std::uint64_t row, std::uint64_t j) const { return row_base_[row].plus(j); }

 private:
  std::uint32_t p_ = 0;
  std::vector<GlobalAddress> row_base_;
  std::vector<std::uint64_t> row_len_;
};

// Per-nodelet pools of fixed-capacity edge blocks. A block is laid out as
// [used, next_handle, ids...]; handles pack (nodelet, word offset).
class EdgeBlockPool {
 public:
  static constexpr word_t kNilHandle = -1;

  EdgeBlockPool() = default;
  static EdgeBlockPool create(Machine& m, std::uint64_t blocks_per_nodelet,
                              std::uint32_t block_capacity, const std::string& name);

  std::uint32_t capacity() const { return capacity_; }
  std::uint64_t blocks_per_nodelet() const { return blocks_per_nodelet_; }

  static word_t pack_handle(GlobalAddress a) {
    return static_cast<word_t>((static_cast<std::uint64_t>(a.nodelet) << 40) | a.word);
  }
  static GlobalAddress unpack_handle(word_t h) {
    auto u = static_cast<std::uint64_t>(h);
    return {static_cast<std::uint32_t>(u >> 40), u & ((1ull << 40) - 1)};
  }

  static GlobalAddress used_addr(word_t handle) { return unpack_handle(handle); }
  static GlobalAddress next_addr(word_t handle) { return unpack_handle(handle).plus(1); }
  static GlobalAddress id_addr(word_t handle, std::uint64_t slot) {
    return unpack_handle(handle).plus(2 + slot);
  }

  GlobalAddress free_count_addr(std::uint32_t nodelet) const { return free_count_[nodelet]; }

  // Pops a block from `preferred`'s pool, scanning (preferred+1) mod P, ...
  // when it is exhausted. Throws AllocationError once every pool is empty.
  SimTask<word_t> alloc_block(Ctx& ctx, std::uint32_t preferred) const;

  // Host-side probe for tests.
  std::uint64_t free_blocks(const Machine& m, std::uint32_t nodelet) const;

 private:
  std::uint32_t p_ = 0;
  std::uint32_t capacity_ = 0;
  std::uint64_t blocks_per_nodelet_ = 0;
  std::uint64_t block_words_ = 0;
  std::vector<GlobalAddress> region_;      // per nodelet
  std::vector<GlobalAddress> free_count_;  // per nodelet, one word
};

// Per-nodelet append-only vertex buffers with a sliding frontier window.
// Pushes land on the pushing threadlet's current nodelet; the window bounds
// are host-side bookkeeping advanced between parallel phases.
class NodeletQueue {
 public:
  NodeletQueue() = default;
  static NodeletQueue create(Machine& m, std::uint64_t capacity_per_nodelet,
                             const std::string& name);

  SimTask<void> push(Ctx& ctx, word_t v);

  void slide_window();
  std::uint64_t frontier_size(std::uint32_t nodelet) const {
    return window_end_[nodelet] - window_begin_[nodelet];
  }
  std::uint64_t total_frontier() const;
  GlobalAddress frontier_addr(std::uint32_t nodelet, std::uint64_t k) const {
    return buffer_[nodelet].plus(window_begin_[nodelet] + k);
  }
  std::uint64_t pushed_total(std::uint32_t nodelet) const { return tail_[nodelet]; }

 private:
  std::uint32_t p_ = 0;
  std::uint64_t capacity_ = 0;
  std::vector<GlobalAddress> buffer_;
  std::vector<std::uint64_t> tail_;
  std::vector<std::uint64_t> window_begin_;
  std::vector<std::uint64_t> window_end_;
};

}  // namespace migrasim

#endif
