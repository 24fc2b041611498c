#include "migrasim/graph.hpp"

#include <cstdio>
#include <fstream>
#include <memory>

#include "migrasim/rng.hpp"

namespace migrasim::graph {

// ---------------------------------------------------------------------------
// Generators

EdgeList gen_rmat(std::uint32_t scale, std::uint32_t edge_factor, std::uint64_t seed) {
  if (scale < 1) throw ConfigError("rmat: scale must be >= 1");
  EdgeList el;
  el.scale = scale;
  el.edge_factor = edge_factor;
  std::uint64_t m = static_cast<std::uint64_t>(edge_factor) << scale;
  el.edges.reserve(m);
  Rng rng(seed);
  constexpr double a = 0.57, b = 0.19, c = 0.19;
  for (std::uint64_t e = 0; e < m; ++e) {
    std::uint64_t src = 0, dst = 0;
    for (std::uint32_t bit = 0; bit < scale; ++bit) {
      double r = rng.next_double();
      std::uint64_t sb = 0, db = 0;
      if (r < a) {
        sb = 0, db = 0;
      } else if (r < a + b) {
        sb = 0, db = 1;
      } else if (r < a + b + c) {
        sb = 1, db = 0;
      } else {
        sb = 1, db = 1;
      }
      src = (src << 1) | sb;
      dst = (dst << 1) | db;
    }
    el.edges.push_back({src, dst});
  }
  return el;
}

EdgeList gen_er(std::uint32_t scale, std::uint32_t edge_factor, std::uint64_t seed) {
  if (scale < 1) throw ConfigError("er: scale must be >= 1");
  EdgeList el;
  el.scale = scale;
  el.edge_factor = edge_factor;
  std::uint64_t n = 1ull << scale;
  std::uint64_t m = static_cast<std::uint64_t>(edge_factor) << scale;
  el.edges.reserve(m);
  Rng rng(seed);
  for (std::uint64_t e = 0; e < m; ++e) {
    std::uint64_t src = rng.next_below(n);
    std::uint64_t dst = rng.next_below(n);
    el.edges.push_back({src, dst});
  }
  return el;
}

// ---------------------------------------------------------------------------
// Binary IO

namespace {

void put_u64_le(std::ofstream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64_le(const unsigned char* buf) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

}  // namespace

void write_edge_list(const EdgeList& el, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open edge list for writing: " + path);
  for (const auto& [s, d] : el.edges) {
    put_u64_le(out, s);
    put_u64_le(out, d);
  }
  if (!out) throw Error("short write to edge list: " + path);
}

EdgeList read_edge_list(const std::string& path, std::uint32_t scale, std::uint32_t edge_factor) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open edge list: " + path);
  in.seekg(0, std::ios::end);
  auto bytes = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  if (bytes % 16 != 0) throw ParseError("edge list size not a multiple of 16 bytes: " + path);
  EdgeList el;
  el.scale = scale;
  el.edge_factor = edge_factor;
  std::uint64_t n = 1ull << scale;
  el.edges.resize(bytes / 16);
  std::vector<unsigned char> buf(bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  for (std::uint64_t i = 0; i < el.edges.size(); ++i) {
    std::uint64_t s = get_u64_le(&buf[16 * i]);
    std::uint64_t d = get_u64_le(&buf[16 * i + 8]);
    if (s >= n || d >= n)
      throw ParseError("edge list vertex id out of range for scale " + std::to_string(scale));
    el.edges[i] = {s, d};
  }
  return el;
}

std::vector<std::vector<std::uint64_t>> reference_adjacency(const EdgeList& el) {
  std::vector<std::vector<std::uint64_t>> adj(el.nvertices());
  for (const auto& [s, d] : el.edges) {
    if (s == d) continue;
    adj[s].push_back(d);
    adj[d].push_back(s);
  }
  return adj;
}

// ---------------------------------------------------------------------------
// Kernel 1

namespace {

struct BuildShared {
  BlockGraph* g = nullptr;
  GlobalAddress input;                      // 2E words on nodelet 0
  std::uint64_t input_pairs = 0;            // undirected edges staged on nodelet 0
  std::vector<GlobalAddress> staging;       // per nodelet, 2 words per directed edge
  std::vector<std::uint64_t> staging_count; // directed edges landing per nodelet
  std::vector<std::uint64_t> scatter_fill;  // root-side write cursors
};

// Inserts d into s's chain; all vertex-table accesses are local to s's
// stripe nodelet, block accesses follow the block handle.
SimTask<void> insert_edge(Ctx& ctx, BuildShared* sh, word_t s, word_t d) {
  BlockGraph& g = *sh->g;
  auto sv = static_cast<std::uint64_t>(s);
  word_t deg = co_await ctx.read(g.degree.addr(sv));
  std::uint32_t cap = g.pool.capacity();
  word_t slot = deg % cap;
  word_t block;
  if (slot == 0) {
    block = co_await g.pool.alloc_block(ctx, g.heads.home(sv));
    co_await ctx.write(EdgeBlockPool::next_addr(block), EdgeBlockPool::kNilHandle);
    co_await ctx.write(EdgeBlockPool::used_addr(block), 0);
    if (deg == 0) {
      co_await ctx.write(g.heads.addr(sv), block);
    } else {
      word_t tail = co_await ctx.read(g.tails.addr(sv));
      co_await ctx.write(EdgeBlockPool::next_addr(tail), block);
    }
    co_await ctx.write(g.tails.addr(sv), block);
  } else {
    block = co_await ctx.read(g.tails.addr(sv));
  }
  co_await ctx.write(EdgeBlockPool::id_addr(block, static_cast<std::uint64_t>(slot)), d);
  co_await ctx.write(EdgeBlockPool::used_addr(block), slot + 1);
  co_await ctx.write(g.degree.addr(sv), deg + 1);
}

SimTask<void> insert_worker(Ctx& ctx, BuildShared* sh, std::uint32_t nodelet) {
  for (std::uint64_t k = 0; k < sh->staging_count[nodelet]; ++k) {
    word_t s = co_await ctx.read(sh->staging[nodelet].plus(2 * k));
    word_t d = co_await ctx.read(sh->staging[nodelet].plus(2 * k + 1));
    co_await insert_edge(ctx, sh, s, d);
  }
}

SimTask<void> stage_directed(Ctx& ctx, BuildShared* sh, word_t src, word_t dst) {
  std::uint32_t n = sh->g->heads.home(static_cast<std::uint64_t>(src));
  std::uint64_t at = sh->scatter_fill[n];
  sh->scatter_fill[n] += 2;
  co_await ctx.remote_write(sh->staging[n].plus(at), src);
  co_await ctx.remote_write(sh->staging[n].plus(at + 1), dst);
}

SimTask<void> build_root(Ctx& ctx, BuildShared* sh) {
  auto p = static_cast<std::uint32_t>(sh->staging.size());
  // Scatter phase: group directed copies by owner stripe and fire them at
  // their nodelet's staging buffer.
  for (std::uint64_t e = 0; e < sh->input_pairs; ++e) {
    word_t s = co_await ctx.read(sh->input.plus(2 * e));
    word_t d = co_await ctx.read(sh->input.plus(2 * e + 1));
    if (s == d) continue;  // self-loops dropped
    co_await stage_directed(ctx, sh, s, d);
    co_await stage_directed(ctx, sh, d, s);
  }
  co_await ctx.sync_children();  // barrier: drain scatter packets

  for (std::uint32_t n = 0; n < p; ++n) {
    if (sh->staging_count[n] == 0) continue;
    TaskFn f = [sh, n](Ctx& c) { return insert_worker(c, sh, n); };
    co_await ctx.spawn(n, std::move(f));
  }
  co_await ctx.sync_children();
}

}  // namespace

BlockGraph kernel1_build(Machine& m, const EdgeList& el, const Kernel1Options& opts) {
  std::uint64_t n = el.nvertices();
  std::uint32_t p = m.total_nodelets();

  auto sh = std::make_shared<BuildShared>();
  auto g = std::make_shared<BlockGraph>();
  g->nvertices = n;
  g->heads = StripedArray::allocate(m, n, "graph.heads");
  g->tails = StripedArray::allocate(m, n, "graph.tails");
  g->degree = StripedArray::allocate(m, n, "graph.degree");
  g->heads.fill(m, EdgeBlockPool::kNilHandle);
  g->tails.fill(m, EdgeBlockPool::kNilHandle);
  g->degree.fill(m, 0);

  std::uint64_t pool_blocks = opts.pool_blocks_per_nodelet;
  if (pool_blocks == 0) {
    // Two directed copies per edge, spread over P pools, doubled for slack.
    pool_blocks = (4 * el.edges.size()) / (static_cast<std::uint64_t>(opts.block_capacity) * p) + 2;
  }
  g->pool = EdgeBlockPool::create(m, pool_blocks, opts.block_capacity, "graph.pool");

  // Edge list staged on nodelet 0 (models the I/O landing spot).
  sh->g = g.get();
  sh->input_pairs = el.edges.size();
  sh->input = m.alloc(0, 2 * el.edges.size() + 1, "graph.edgelist");
  for (std::uint64_t e = 0; e < el.edges.size(); ++e) {
    m.poke(sh->input.plus(2 * e), static_cast<word_t>(el.edges[e].first));
    m.poke(sh->input.plus(2 * e + 1), static_cast<word_t>(el.edges[e].second));
  }

  sh->staging_count.assign(p, 0);
  for (const auto& [s, d] : el.edges) {
    if (s == d) continue;
    sh->staging_count[s % p] += 1;
    sh->staging_count[d % p] += 1;
  }
  sh->staging.resize(p);
  sh->scatter_fill.assign(p, 0);
  for (std::uint32_t i = 0; i < p; ++i)
    sh->staging[i] = m.alloc(i, 2 * sh->staging_count[i] + 1, "graph.staging");

  m.spawn_at(0, [sh, g](Ctx& ctx) { return build_root(ctx, sh.get()); });
  m.run_until_idle();
  return *g;
}

// ---------------------------------------------------------------------------
// Traversal

SimTask<word_t> NeighborCursor::next(Ctx& ctx) {
  if (!head_read_) {
    head_read_ = true;
    block_ = co_await ctx.read(g_->heads.addr(v_));
    if (block_ != EdgeBlockPool::kNilHandle) {
      used_ = co_await ctx.read(EdgeBlockPool::used_addr(block_));
      slot_ = 0;
    }
  }
  while (block_ != EdgeBlockPool::kNilHandle) {
    if (slot_ < used_) {
      word_t id = co_await ctx.read(
          EdgeBlockPool::id_addr(block_, static_cast<std::uint64_t>(slot_)));
      ++slot_;
      co_return id;
    }
    if (++blocks_visited_ > g_->nvertices + 2)
      throw FaultError("corrupt edge-block chain at vertex " + std::to_string(v_));
    block_ = co_await ctx.read(EdgeBlockPool::next_addr(block_));
    if (block_ == EdgeBlockPool::kNilHandle) break;
    used_ = co_await ctx.read(EdgeBlockPool::used_addr(block_));
    slot_ = 0;
  }
  co_return -1;
}

SimTask<std::vector<std::uint64_t>> read_neighbors(Ctx& ctx, const BlockGraph& g,
                                                   std::uint64_t v) {
  std::vector<std::uint64_t> out;
  NeighborCursor cur(&g, v);
  while (true) {
    word_t id = co_await cur.next(ctx);
    if (id < 0) break;
    out.push_back(static_cast<std::uint64_t>(id));
  }
  co_return out;
}

}  // namespace migrasim::graph
