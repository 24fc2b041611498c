#include "migrasim/bfs.hpp"

#include <algorithm>
#include <deque>
#include <memory>

#include "migrasim/dds.hpp"

namespace migrasim::bfs {

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "migrating" || s == "migrate") return Algorithm::migrating;
  if (s == "remote" || s == "remote_writes" || s == "remote-writes")
    return Algorithm::remote_writes;
  throw ParseError("unknown bfs algorithm: " + s);
}

const char* to_string(Algorithm a) {
  return a == Algorithm::migrating ? "migrating" : "remote_writes";
}

namespace {

struct BfsShared {
  const graph::BlockGraph* g = nullptr;
  Algorithm alg = Algorithm::migrating;
  BfsOptions opts;
  StripedArray parents;
  StripedArray new_parents;  // remote-write variant only
  NodeletQueue queue;
  std::uint64_t traversed = 0;
  std::uint64_t claim_migrations = 0;
  std::uint64_t levels = 0;
};

SimTask<void> init_worker(Ctx& ctx, BfsShared* sh, std::uint32_t nodelet) {
  std::uint64_t cnt = sh->parents.local_count(nodelet);
  for (std::uint64_t k = 0; k < cnt; ++k)
    co_await ctx.write(sh->parents.addr(sh->parents.local_index(nodelet, k)), -1);
  if (sh->alg == Algorithm::remote_writes) {
    for (std::uint64_t k = 0; k < cnt; ++k)
      co_await ctx.write(sh->new_parents.addr(sh->new_parents.local_index(nodelet, k)), -1);
  }
}

// Algorithm 1 inner loop: read P[d] (migrating to d's home), claim with CAS,
// push the freshly claimed vertex into the queue local to d.
SimTask<void> frontier_worker_migrating(Ctx& ctx, BfsShared* sh, std::uint32_t nodelet,
                                        std::uint64_t k0, std::uint64_t k1) {
  for (std::uint64_t k = k0; k < k1; ++k) {
    word_t s = co_await ctx.read(sh->queue.frontier_addr(nodelet, k));
    graph::NeighborCursor cur(sh->g, static_cast<std::uint64_t>(s));
    while (true) {
      word_t d = co_await cur.next(ctx);
      if (d < 0) break;
      sh->traversed++;
      std::uint64_t mig0 = ctx.stats().migrations;
      word_t pd = co_await ctx.read(sh->parents.addr(static_cast<std::uint64_t>(d)));
      if (pd == -1) {
        CasResult r = co_await ctx.cas(sh->parents.addr(static_cast<std::uint64_t>(d)), -1, s);
        if (r.success) co_await sh->queue.push(ctx, d);
      }
      sh->claim_migrations += ctx.stats().migrations - mig0;
    }
  }
}

// Algorithm 2 traversal: claims are fire-and-forget remote writes to nP.
SimTask<void> frontier_worker_remote(Ctx& ctx, BfsShared* sh, std::uint32_t nodelet,
                                     std::uint64_t k0, std::uint64_t k1) {
  for (std::uint64_t k = k0; k < k1; ++k) {
    word_t s = co_await ctx.read(sh->queue.frontier_addr(nodelet, k));
    graph::NeighborCursor cur(sh->g, static_cast<std::uint64_t>(s));
    while (true) {
      word_t d = co_await cur.next(ctx);
      if (d < 0) break;
      sh->traversed++;
      std::uint64_t mig0 = ctx.stats().migrations;
      co_await ctx.remote_write(sh->new_parents.addr(static_cast<std::uint64_t>(d)), s);
      sh->claim_migrations += ctx.stats().migrations - mig0;
    }
  }
}

// Algorithm 2 scan: each nodelet sweeps its own parent stripe and promotes
// vertices claimed during the last traversal.
SimTask<void> scan_worker(Ctx& ctx, BfsShared* sh, std::uint32_t nodelet) {
  std::uint64_t cnt = sh->parents.local_count(nodelet);
  for (std::uint64_t k = 0; k < cnt; ++k) {
    std::uint64_t v = sh->parents.local_index(nodelet, k);
    word_t pv = co_await ctx.read(sh->parents.addr(v));
    if (pv != -1) continue;
    word_t npv = co_await ctx.read(sh->new_parents.addr(v));
    if (npv == -1) continue;
    co_await ctx.write(sh->parents.addr(v), npv);
    co_await sh->queue.push(ctx, static_cast<word_t>(v));
  }
}

SimTask<void> bfs_main(Ctx& ctx, BfsShared* sh, std::uint64_t root, std::uint32_t p) {
  // P[v] <- -1 (and nP for the remote-write variant), stripe-local writers.
  for (std::uint32_t n = 0; n < p; ++n) {
    TaskFn f = [sh, n](Ctx& c) { return init_worker(c, sh, n); };
    co_await ctx.spawn(n, std::move(f));
  }
  co_await ctx.sync_children();

  co_await ctx.write(sh->parents.addr(root), static_cast<word_t>(root));
  co_await sh->queue.push(ctx, static_cast<word_t>(root));  // local: write migrated us home

  std::uint64_t frontiers = 0;
  while (true) {
    sh->queue.slide_window();
    std::uint64_t total = sh->queue.total_frontier();
    if (total == 0) break;
    ++frontiers;

    for (std::uint32_t n = 0; n < p; ++n) {
      std::uint64_t sz = sh->queue.frontier_size(n);
      for (std::uint64_t k0 = 0; k0 < sz; k0 += sh->opts.frontier_grain) {
        std::uint64_t k1 = std::min(sz, k0 + sh->opts.frontier_grain);
        TaskFn f =
            sh->alg == Algorithm::migrating
                ? TaskFn([sh, n, k0, k1](Ctx& c) { return frontier_worker_migrating(c, sh, n, k0, k1); })
                : TaskFn([sh, n, k0, k1](Ctx& c) { return frontier_worker_remote(c, sh, n, k0, k1); });
        co_await ctx.spawn(n, std::move(f));
      }
    }
    co_await ctx.sync_children();  // barrier; drains nP remote writes

    if (sh->alg == Algorithm::remote_writes) {
      for (std::uint32_t n = 0; n < p; ++n) {
        TaskFn f = [sh, n](Ctx& c) { return scan_worker(c, sh, n); };
        co_await ctx.spawn(n, std::move(f));
      }
      co_await ctx.sync_children();
    }
  }
  sh->levels = frontiers ? frontiers - 1 : 0;
}

BfsResult run_bfs(Machine& m, const graph::BlockGraph& g, std::uint64_t root, Algorithm alg,
                  const BfsOptions& opts) {
  if (root >= g.nvertices) throw ConfigError("bfs: root out of range");
  auto sh = std::make_shared<BfsShared>();
  sh->g = &g;
  sh->alg = alg;
  sh->opts = opts;
  sh->parents = StripedArray::allocate(m, g.nvertices, "bfs.P");
  if (alg == Algorithm::remote_writes)
    sh->new_parents = StripedArray::allocate(m, g.nvertices, "bfs.nP");
  sh->queue = NodeletQueue::create(m, g.nvertices, "bfs.Q");

  std::uint32_t p = m.total_nodelets();
  EventCounters before = m.counters();
  m.spawn_at(0, [sh, root, p](Ctx& ctx) { return bfs_main(ctx, sh.get(), root, p); });
  m.run_until_idle();

  BfsResult res;
  res.parents.resize(g.nvertices);
  for (std::uint64_t v = 0; v < g.nvertices; ++v)
    res.parents[v] = static_cast<std::int64_t>(m.peek(sh->parents.addr(v)));
  res.traversed_edges = sh->traversed;
  res.levels = sh->levels;
  res.claim_migrations = sh->claim_migrations;
  res.counters = m.counters() - before;
  res.time.makespan_cycles = res.counters.max_busy_cycles();
  res.time.seconds = static_cast<double>(res.time.makespan_cycles) / m.config().clock_hz;
  return res;
}

}  // namespace

BfsResult bfs_migrating(Machine& m, const graph::BlockGraph& g, std::uint64_t root,
                        const BfsOptions& opts) {
  return run_bfs(m, g, root, Algorithm::migrating, opts);
}

BfsResult bfs_remote_writes(Machine& m, const graph::BlockGraph& g, std::uint64_t root,
                            const BfsOptions& opts) {
  return run_bfs(m, g, root, Algorithm::remote_writes, opts);
}

// ---------------------------------------------------------------------------
// Validation

std::vector<std::int64_t> serial_bfs_depths(const std::vector<std::vector<std::uint64_t>>& adj,
                                            std::uint64_t root) {
  std::vector<std::int64_t> depth(adj.size(), -1);
  std::deque<std::uint64_t> q;
  depth[root] = 0;
  q.push_back(root);
  while (!q.empty()) {
    std::uint64_t v = q.front();
    q.pop_front();
    for (std::uint64_t w : adj[v]) {
      if (depth[w] == -1) {
        depth[w] = depth[v] + 1;
        q.push_back(w);
      }
    }
  }
  return depth;
}

std::vector<std::int64_t> depths_from_parents(const std::vector<std::int64_t>& parents,
                                              std::uint64_t root) {
  std::vector<std::int64_t> depth(parents.size(), -1);
  if (root < parents.size()) depth[root] = 0;
  for (std::uint64_t v = 0; v < parents.size(); ++v) {
    if (parents[v] == -1 || depth[v] != -1) continue;
    // walk up, bounded by n steps
    std::vector<std::uint64_t> path;
    std::uint64_t cur = v;
    bool ok = false;
    for (std::uint64_t steps = 0; steps <= parents.size(); ++steps) {
      if (depth[cur] != -1) {
        ok = true;
        break;
      }
      path.push_back(cur);
      std::int64_t pc = parents[cur];
      if (pc < 0 || static_cast<std::uint64_t>(pc) >= parents.size()) break;
      if (static_cast<std::uint64_t>(pc) == cur) break;  // non-root self-parent
      cur = static_cast<std::uint64_t>(pc);
    }
    if (!ok) continue;  // broken or cyclic chain: leave -1
    std::int64_t d = depth[cur];
    for (auto it = path.rbegin(); it != path.rend(); ++it) depth[*it] = ++d;
  }
  return depth;
}

ValidationReport validate_bfs(const std::vector<std::vector<std::uint64_t>>& adj,
                              const BfsResult& result, std::uint64_t root) {
  ValidationReport rep;
  const auto& parents = result.parents;
  std::uint64_t n = parents.size();

  rep.checks[0].name = "root is its own parent";
  rep.checks[0].pass = root < n && parents[root] == static_cast<std::int64_t>(root);
  if (!rep.checks[0].pass) rep.checks[0].witness = "root " + std::to_string(root);

  rep.checks[1].name = "parent chains reach root without cycles";
  rep.checks[1].pass = true;
  auto depth = depths_from_parents(parents, root);
  for (std::uint64_t v = 0; v < n; ++v) {
    if (parents[v] != -1 && depth[v] == -1) {
      rep.checks[1].pass = false;
      rep.checks[1].witness = "vertex " + std::to_string(v);
      break;
    }
  }

  rep.checks[2].name = "tree edges exist in graph";
  rep.checks[2].pass = true;
  for (std::uint64_t v = 0; v < n && rep.checks[2].pass; ++v) {
    if (v == root || parents[v] == -1) continue;
    auto pv = static_cast<std::uint64_t>(parents[v]);
    bool found = false;
    for (std::uint64_t w : adj[v])
      if (w == pv) {
        found = true;
        break;
      }
    if (!found) {
      rep.checks[2].pass = false;
      rep.checks[2].witness = "edge (" + std::to_string(v) + "," + std::to_string(pv) + ")";
    }
  }

  rep.checks[3].name = "levels differ by at most one across graph edges";
  rep.checks[3].pass = true;
  for (std::uint64_t v = 0; v < n && rep.checks[3].pass; ++v) {
    if (depth[v] == -1) continue;
    for (std::uint64_t w : adj[v]) {
      if (depth[w] == -1) continue;
      std::int64_t dd = depth[v] - depth[w];
      if (dd < -1 || dd > 1) {
        rep.checks[3].pass = false;
        rep.checks[3].witness = "edge (" + std::to_string(v) + "," + std::to_string(w) + ")";
        break;
      }
    }
  }

  rep.checks[4].name = "every vertex in root's component reached";
  rep.checks[4].pass = true;
  auto ref = serial_bfs_depths(adj, root);
  for (std::uint64_t v = 0; v < n; ++v) {
    bool should = ref[v] != -1;
    bool did = parents[v] != -1;
    if (should != did) {
      rep.checks[4].pass = false;
      rep.checks[4].witness = "vertex " + std::to_string(v);
      break;
    }
  }
  return rep;
}

BfsMetrics bfs_metrics(std::uint32_t scale, std::uint32_t edge_factor, double seconds) {
  if (!(seconds > 0.0)) throw ConfigError("bfs_metrics: time must be positive");
  double edges = static_cast<double>(static_cast<std::uint64_t>(edge_factor) << scale);
  BfsMetrics m;
  m.teps = edges / seconds;
  m.bw_bytes_per_s = m.teps * 2.0 * 8.0;
  return m;
}

}  // namespace migrasim::bfs
