#include "migrasim/dds.hpp"

namespace migrasim {

// ---------------------------------------------------------------------------
// StripedArray

StripedArray StripedArray::allocate(Machine& m, std::uint64_t length, const std::string& name) {
  StripedArray a;
  a.length_ = length;
  a.p_ = m.total_nodelets();
  a.base_.resize(a.p_);
  std::uint64_t per_nodelet = length / a.p_ + (length % a.p_ ? 1 : 0);
  if (per_nodelet == 0) per_nodelet = 1;  // keep addresses valid for empty arrays
  for (std::uint32_t n = 0; n < a.p_; ++n)
    a.base_[n] = m.alloc(n, per_nodelet, name + "[stripe " + std::to_string(n) + "]");
  return a;
}

void StripedArray::fill(Machine& m, word_t v) const {
  for (std::uint64_t i = 0; i < length_; ++i) m.poke(addr(i), v);
}

std::vector<word_t> StripedArray::extract(const Machine& m) const {
  std::vector<word_t> out(length_);
  for (std::uint64_t i = 0; i < length_; ++i) out[i] = m.peek(addr(i));
  return out;
}

// ---------------------------------------------------------------------------
// ReplicatedArray

ReplicatedArray ReplicatedArray::allocate(Machine& m, std::uint64_t length,
                                          const std::string& name) {
  ReplicatedArray a;
  a.length_ = length;
  a.p_ = m.total_nodelets();
  a.base_.resize(a.p_);
  std::uint64_t words = length ? length : 1;
  for (std::uint32_t n = 0; n < a.p_; ++n)
    a.base_[n] = m.alloc(n, words, name + "[copy " + std::to_string(n) + "]");
  return a;
}

void ReplicatedArray::poke_all(Machine& m, std::uint64_t i, word_t v) const {
  for (std::uint32_t n = 0; n < p_; ++n) m.poke(addr_on(n, i), v);
}

SimTask<void> replicated_write(Ctx& ctx, const ReplicatedArray& arr, std::uint64_t i, word_t v) {
  for (std::uint32_t n = 0; n < arr.copies(); ++n)
    co_await ctx.remote_write(arr.addr_on(n, i), v);
}

// ---------------------------------------------------------------------------
// JaggedLocalArray

JaggedLocalArray JaggedLocalArray::allocate(Machine& m,
                                            const std::vector<std::uint64_t>& row_lengths,
                                            const std::string& name) {
  JaggedLocalArray a;
  a.p_ = m.total_nodelets();
  a.row_len_ = row_lengths;
  a.row_base_.resize(row_lengths.size());

  // One allocation per nodelet covering all of its rows, rows packed in
  // ascending global index order.
  std::vector<std::uint64_t> nodelet_words(a.p_, 0);
  for (std::size_t r = 0; r < row_lengths.size(); ++r) nodelet_words[r % a.p_] += row_lengths[r];
  std::vector<GlobalAddress> region(a.p_);
  for (std::uint32_t n = 0; n < a.p_; ++n)
    region[n] = m.alloc(n, nodelet_words[n] ? nodelet_words[n] : 1,
                        name + "[rows@" + std::to_string(n) + "]");
  std::vector<std::uint64_t> cursor(a.p_, 0);
  for (std::size_t r = 0; r < row_lengths.size(); ++r) {
    std::uint32_t n = static_cast<std::uint32_t>(r % a.p_);
    a.row_base_[r] = region[n].plus(cursor[n]);
    cursor[n] += row_lengths[r];
  }
  return a;
}

// ---------------------------------------------------------------------------
// EdgeBlockPool

EdgeBlockPool EdgeBlockPool::create(Machine& m, std::uint64_t blocks_per_nodelet,
                                    std::uint32_t block_capacity, const std::string& name) {
  if (block_capacity < 1) throw ConfigError("edge block capacity must be >= 1");
  if (blocks_per_nodelet < 1) throw ConfigError("edge block pool needs at least one block");
  EdgeBlockPool pool;
  pool.p_ = m.total_nodelets();
  pool.capacity_ = block_capacity;
  pool.blocks_per_nodelet_ = blocks_per_nodelet;
  pool.block_words_ = 2 + block_capacity;
  pool.region_.resize(pool.p_);
  pool.free_count_.resize(pool.p_);
  for (std::uint32_t n = 0; n < pool.p_; ++n) {
    pool.region_[n] = m.alloc(n, blocks_per_nodelet * pool.block_words_,
                              name + "[blocks@" + std::to_string(n) + "]");
    pool.free_count_[n] = m.alloc(n, 1, name + "[free@" + std::to_string(n) + "]");
    m.poke(pool.free_count_[n], static_cast<word_t>(blocks_per_nodelet));
  }
  return pool;
}

SimTask<word_t> EdgeBlockPool::alloc_block(Ctx& ctx, std::uint32_t preferred) const {
  for (std::uint32_t k = 0; k < p_; ++k) {
    std::uint32_t n = (preferred + k) % p_;
    word_t count = co_await ctx.read(free_count_[n]);
    while (count > 0) {
      CasResult r = co_await ctx.cas(free_count_[n], count, count - 1);
      if (r.success) {
        GlobalAddress block = region_[n].plus(static_cast<std::uint64_t>(count - 1) * block_words_);
        co_return pack_handle(block);
      }
      count = r.observed;
    }
  }
  throw AllocationError("edge block pools exhausted on all nodelets");
}

std::uint64_t EdgeBlockPool::free_blocks(const Machine& m, std::uint32_t nodelet) const {
  return static_cast<std::uint64_t>(m.peek(free_count_[nodelet]));
}

// ---------------------------------------------------------------------------
// NodeletQueue

NodeletQueue NodeletQueue::create(Machine& m, std::uint64_t capacity_per_nodelet,
                                  const std::string& name) {
  NodeletQueue q;
  q.p_ = m.total_nodelets();
  q.capacity_ = capacity_per_nodelet;
  q.buffer_.resize(q.p_);
  q.tail_.assign(q.p_, 0);
  q.window_begin_.assign(q.p_, 0);
  q.window_end_.assign(q.p_, 0);
  for (std::uint32_t n = 0; n < q.p_; ++n)
    q.buffer_[n] = m.alloc(n, capacity_per_nodelet ? capacity_per_nodelet : 1,
                           name + "[q@" + std::to_string(n) + "]");
  return q;
}

SimTask<void> NodeletQueue::push(Ctx& ctx, word_t v) {
  std::uint32_t n = ctx.current_nodelet();
  if (tail_[n] >= capacity_)
    throw AllocationError("nodelet queue overflow on nodelet " + std::to_string(n));
  std::uint64_t idx = tail_[n]++;
  co_await ctx.write(buffer_[n].plus(idx), v);
}

void NodeletQueue::slide_window() {
  for (std::uint32_t n = 0; n < p_; ++n) {
    window_begin_[n] = window_end_[n];
    window_end_[n] = tail_[n];
  }
}

std::uint64_t NodeletQueue::total_frontier() const {
  std::uint64_t s = 0;
  for (std::uint32_t n = 0; n < p_; ++n) s += frontier_size(n);
  return s;
}

}  // namespace migrasim
