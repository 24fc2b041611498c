#ifndef MIGRASIM_GRAPH_HPP
#define MIGRASIM_GRAPH_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "migrasim/dds.hpp"
#include "migrasim/machine.hpp"

namespace migrasim::graph {

struct EdgeList {
  std::uint32_t scale = 0;
  std::uint32_t edge_factor = 16;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> edges;

  std::uint64_t nvertices() const { return 1ull << scale; }
};

// Graph500 RMAT with (a,b,c,d) = (0.57, 0.19, 0.19, 0.05); uniform random
// (Erdos-Renyi) endpoints. Both emit exactly edge_factor * 2^scale edges and
// are deterministic in the seed. Self-loops may occur; construction drops
// them.
EdgeList gen_rmat(std::uint32_t scale, std::uint32_t edge_factor, std::uint64_t seed);
EdgeList gen_er(std::uint32_t scale, std::uint32_t edge_factor, std::uint64_t seed);

// Binary little-endian (u64 src, u64 dst) pairs.
void write_edge_list(const EdgeList& el, const std::string& path);
EdgeList read_edge_list(const std::string& path, std::uint32_t scale, std::uint32_t edge_factor);

// Flat host adjacency (both directions, self-loops dropped, duplicates
// kept): the reference structure for validation and oracles.
std::vector<std::vector<std::uint64_t>> reference_adjacency(const EdgeList& el);

struct Kernel1Options {
  std::uint32_t block_capacity = 16;
  std::uint64_t pool_blocks_per_nodelet = 0;  // 0: sized from the edge list
};

// STINGER-style edge-block graph: striped head/degree arrays, per-vertex
// chains of fixed-capacity blocks drawn from per-nodelet pools.
struct BlockGraph {
  std::uint64_t nvertices = 0;
  StripedArray heads;   // first block handle or nil
  StripedArray tails;   // last block handle (insertion bookkeeping)
  StripedArray degree;
  EdgeBlockPool pool;

  std::uint64_t host_degree(const Machine& m, std::uint64_t v) const {
    return static_cast<std::uint64_t>(m.peek(degree.addr(v)));
  }
};

// Graph500 Kernel 1. The edge list starts resident on nodelet 0; the
// construction groups directed copies by destination stripe (the low bits of
// the owning vertex id), scatters them with remote writes, and then each
// nodelet inserts its local group into the block structure, overflowing to
// the next nodelet's pool when the local one runs dry.
BlockGraph kernel1_build(Machine& m, const EdgeList& el, const Kernel1Options& opts = {});

// Incremental neighbor walk. Each next() yields one neighbor id via charged
// machine reads, migrating to the block's home as needed, so callers can
// interleave per-neighbor work exactly like the BFS inner loop.
class NeighborCursor {
 public:
  NeighborCursor(const BlockGraph* g, std::uint64_t v) : g_(g), v_(v) {}

  // Returns the next neighbor id, or -1 when the chain is exhausted.
  SimTask<word_t> next(Ctx& ctx);

 private:
  const BlockGraph* g_;
  std::uint64_t v_;
  bool head_read_ = false;
  word_t block_ = EdgeBlockPool::kNilHandle;
  word_t used_ = 0;
  word_t slot_ = 0;
  std::uint64_t blocks_visited_ = 0;
};

// Convenience: collect the whole neighbor list of v.
SimTask<std::vector<std::uint64_t>> read_neighbors(Ctx& ctx, const BlockGraph& g, std::uint64_t v);

}  // namespace migrasim::graph

#endif
