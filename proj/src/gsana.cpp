#include "migrasim/gsana.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "migrasim/dds.hpp"
#include "migrasim/rng.hpp"

namespace migrasim::gsana {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// AttributedGraph

std::uint64_t AttributedGraph::nedges() const {
  std::uint64_t s = 0;
  for (const auto& a : adj) s += a.size();
  return s / 2;
}

void AttributedGraph::add_edge(std::uint64_t s, std::uint64_t d, std::uint32_t etype) {
  adj[s].push_back(d);
  adj_etype[s].push_back(etype);
  adj[d].push_back(s);
  adj_etype[d].push_back(etype);
}

void AttributedGraph::sort_adjacency() {
  for (std::uint64_t v = 0; v < n; ++v) {
    std::vector<std::pair<std::uint64_t, std::uint32_t>> z(adj[v].size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = {adj[v][i], adj_etype[v][i]};
    std::sort(z.begin(), z.end());
    for (std::size_t i = 0; i < z.size(); ++i) {
      adj[v][i] = z[i].first;
      adj_etype[v][i] = z[i].second;
    }
  }
}

std::string AttributedGraph::to_json() const {
  ordered_json j;
  j["n"] = n;
  ordered_json edges = ordered_json::array();
  for (std::uint64_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < adj[s].size(); ++i)
      if (adj[s][i] > s) edges.push_back({s, adj[s][i], adj_etype[s][i]});
  j["edges"] = edges;
  j["vtypes"] = vtype;
  j["attrs"] = attrs;
  return j.dump();
}

AttributedGraph AttributedGraph::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("attributed graph json: ") + e.what());
  }
  AttributedGraph g;
  g.n = j.at("n").get<std::uint64_t>();
  g.adj.resize(g.n);
  g.adj_etype.resize(g.n);
  g.vtype = j.at("vtypes").get<std::vector<std::uint32_t>>();
  g.attrs = j.at("attrs").get<std::vector<std::vector<std::uint32_t>>>();
  if (g.vtype.size() != g.n || g.attrs.size() != g.n)
    throw ParseError("attributed graph json: vtypes/attrs length mismatch");
  for (auto& a : g.attrs) std::sort(a.begin(), a.end());
  for (const auto& e : j.at("edges")) {
    std::uint64_t s = e.at(0).get<std::uint64_t>();
    std::uint64_t d = e.at(1).get<std::uint64_t>();
    auto t = e.at(2).get<std::uint32_t>();
    if (s >= g.n || d >= g.n) throw ParseError("attributed graph json: edge endpoint out of range");
    if (s == d) continue;
    g.add_edge(s, d, t);
  }
  g.sort_adjacency();
  return g;
}

GraphMetadata GraphMetadata::from(const AttributedGraph& g) {
  GraphMetadata m;
  m.vtype = g.vtype;
  m.degree.resize(g.n);
  m.ntypes.resize(g.n);
  m.etypes.resize(g.n);
  m.attrs = g.attrs;
  for (std::uint64_t v = 0; v < g.n; ++v) {
    m.degree[v] = g.adj[v].size();
    m.ntypes[v].reserve(g.adj[v].size());
    for (std::uint64_t w : g.adj[v]) m.ntypes[v].push_back(g.vtype[w]);
    std::sort(m.ntypes[v].begin(), m.ntypes[v].end());
    m.etypes[v] = g.adj_etype[v];
    std::sort(m.etypes[v].begin(), m.etypes[v].end());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Placement

std::vector<PlacedVertex> place_vertices(const AttributedGraph& g) {
  if (g.n == 0) throw ConfigError("place_vertices: empty graph");
  std::uint64_t anchor = 0;
  for (std::uint64_t v = 1; v < g.n; ++v)
    if (g.degree(v) > g.degree(anchor)) anchor = v;

  std::vector<std::int64_t> hop(g.n, -1);
  std::deque<std::uint64_t> q;
  hop[anchor] = 0;
  q.push_back(anchor);
  std::int64_t max_hop = 0;
  while (!q.empty()) {
    std::uint64_t v = q.front();
    q.pop_front();
    for (std::uint64_t w : g.adj[v])
      if (hop[w] == -1) {
        hop[w] = hop[v] + 1;
        max_hop = std::max(max_hop, hop[w]);
        q.push_back(w);
      }
  }

  std::uint64_t max_deg = 0;
  for (std::uint64_t v = 0; v < g.n; ++v) max_deg = std::max(max_deg, g.degree(v));
  double ylog = max_deg ? std::log2(1.0 + static_cast<double>(max_deg)) : 0.0;

  std::vector<PlacedVertex> out(g.n);
  for (std::uint64_t v = 0; v < g.n; ++v) {
    out[v].id = v;
    out[v].x = hop[v] >= 0
                   ? static_cast<double>(hop[v]) / static_cast<double>(max_hop + 1)
                   : 1.0 - 1e-9;
    out[v].y = max_deg ? std::log2(1.0 + static_cast<double>(g.degree(v))) / ylog : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hilbert curve

std::uint64_t hilbert_rank(std::uint64_t ix, std::uint64_t iy, std::uint32_t order) {
  if (order == 0 || order > 31) throw ConfigError("hilbert_rank: order out of range");
  std::uint64_t n = 1ull << order;
  if (ix >= n || iy >= n) throw ConfigError("hilbert_rank: cell out of range");
  std::uint64_t x = ix, y = iy, d = 0;
  for (std::uint64_t s = n / 2; s > 0; s /= 2) {
    std::uint64_t rx = (x & s) ? 1 : 0;
    std::uint64_t ry = (y & s) ? 1 : 0;
    d += s * s * ((3 * rx) ^ ry);
    if (ry == 0) {
      if (rx == 1) {
        x = n - 1 - x;
        y = n - 1 - y;
      }
      std::swap(x, y);
    }
  }
  return d;
}

namespace {

constexpr std::uint32_t kCenterOrder = 17;  // exact center cells for depth <= 16

std::uint64_t bucket_hilbert(const Bucket& b) {
  std::uint64_t cx = (2 * b.cell_x + 1) << (16 - b.depth);
  std::uint64_t cy = (2 * b.cell_y + 1) << (16 - b.depth);
  return hilbert_rank(cx, cy, kCenterOrder);
}

}  // namespace

// ---------------------------------------------------------------------------
// Quad tree

namespace {

void split_bucket(const std::vector<PlacedVertex>& placed, std::vector<std::uint64_t> members,
                  Rect rect, std::uint32_t depth, std::uint64_t cx, std::uint64_t cy,
                  QuadTree& qt) {
  if (members.empty()) return;
  if (members.size() <= qt.bucket_cap || depth >= qt.max_depth) {
    Bucket b;
    b.rect = rect;
    b.depth = depth;
    b.cell_x = cx;
    b.cell_y = cy;
    b.members = std::move(members);
    b.hilbert = bucket_hilbert(b);
    qt.leaves.push_back(std::move(b));
    return;
  }
  double mx = (rect.x0 + rect.x1) / 2.0;
  double my = (rect.y0 + rect.y1) / 2.0;
  std::vector<std::uint64_t> part[2][2];
  for (std::uint64_t id : members) {
    int qx = placed[id].x >= mx ? 1 : 0;  // boundary points take the higher child
    int qy = placed[id].y >= my ? 1 : 0;
    part[qx][qy].push_back(id);
  }
  for (int qx = 0; qx < 2; ++qx) {
    for (int qy = 0; qy < 2; ++qy) {
      Rect r{qx ? mx : rect.x0, qy ? my : rect.y0, qx ? rect.x1 : mx, qy ? rect.y1 : my};
      split_bucket(placed, std::move(part[qx][qy]), r, depth + 1, 2 * cx + qx, 2 * cy + qy, qt);
    }
  }
}

}  // namespace

QuadTree build_quadtree(const std::vector<PlacedVertex>& placed, std::uint32_t b_cap,
                        std::uint32_t max_depth) {
  if (b_cap < 1) throw ConfigError("build_quadtree: bucket capacity must be >= 1");
  if (max_depth < 1 || max_depth > 16) throw ConfigError("build_quadtree: depth must be in 1..16");
  QuadTree qt;
  qt.bucket_cap = b_cap;
  qt.max_depth = max_depth;
  std::vector<std::uint64_t> all(placed.size());
  for (std::size_t i = 0; i < placed.size(); ++i) all[i] = placed[i].id;
  std::sort(all.begin(), all.end());
  split_bucket(placed, std::move(all), Rect{}, 0, 0, 0, qt);

  qt.hilbert_order.resize(qt.leaves.size());
  for (std::uint32_t i = 0; i < qt.leaves.size(); ++i) qt.hilbert_order[i] = i;
  std::sort(qt.hilbert_order.begin(), qt.hilbert_order.end(),
            [&](std::uint32_t a, std::uint32_t b) {
              if (qt.leaves[a].hilbert != qt.leaves[b].hilbert)
                return qt.leaves[a].hilbert < qt.leaves[b].hilbert;
              return a < b;
            });
  return qt;
}

std::vector<std::uint32_t> neighbor_buckets(const QuadTree& qt1, const Bucket& b) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t idx : qt1.hilbert_order) {
    const Rect& a = qt1.leaves[idx].rect;
    bool touch = a.x0 <= b.rect.x1 && b.rect.x0 <= a.x1 && a.y0 <= b.rect.y1 &&
                 b.rect.y0 <= a.y1;
    if (touch) out.push_back(idx);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layouts

Layout layout_from_string(const std::string& s) {
  if (s == "blk" || s == "BLK" || s == "0") return Layout::blk;
  if (s == "hcb" || s == "HCB" || s == "1") return Layout::hcb;
  throw ParseError("unknown layout: " + s);
}

const char* to_string(Layout l) { return l == Layout::blk ? "BLK" : "HCB"; }

LayoutAssignment assign_layout(const QuadTree& qt, const AttributedGraph& g, Layout mode,
                               std::uint32_t p) {
  if (p < 1) throw ConfigError("assign_layout: need at least one nodelet");
  LayoutAssignment la;
  la.mode = mode;
  la.vertex_nodelet.assign(g.n, 0);
  la.bucket_nodelet.assign(qt.leaves.size(), 0);
  la.renamed_id.resize(g.n);
  std::uint64_t nbuckets = qt.leaves.size();

  if (mode == Layout::blk) {
    for (std::uint64_t v = 0; v < g.n; ++v)
      la.vertex_nodelet[v] = static_cast<std::uint32_t>(v * p / g.n);
    for (std::uint64_t r = 0; r < nbuckets; ++r)
      la.bucket_nodelet[r] = static_cast<std::uint32_t>(r * p / nbuckets);
    la.bucket_order.resize(nbuckets);
    for (std::uint32_t i = 0; i < nbuckets; ++i) la.bucket_order[i] = i;
    for (std::uint64_t v = 0; v < g.n; ++v) la.renamed_id[v] = v;
    return la;
  }

  // HCB: buckets in Hilbert order, contiguous rename, contiguous bucket
  // groups balanced by incident-edge weight, vertices co-resident with their
  // bucket.
  la.bucket_order = qt.hilbert_order;
  std::uint64_t next_id = 0;
  std::vector<std::uint64_t> weight(nbuckets, 0);
  std::uint64_t total = 0;
  for (std::uint32_t leaf : la.bucket_order) {
    for (std::uint64_t v : qt.leaves[leaf].members) la.renamed_id[v] = next_id++;
    std::uint64_t w = 1;  // presence weight keeps empty-edge graphs balanced
    for (std::uint64_t v : qt.leaves[leaf].members) w += g.degree(v);
    weight[leaf] = w;
    total += w;
  }
  std::uint32_t nodelet = 0;
  std::uint64_t acc = 0;
  for (std::uint32_t leaf : la.bucket_order) {
    la.bucket_nodelet[leaf] = nodelet;
    for (std::uint64_t v : qt.leaves[leaf].members) la.vertex_nodelet[v] = nodelet;
    acc += weight[leaf];
    while (nodelet + 1 < p &&
           acc * p >= total * static_cast<std::uint64_t>(nodelet + 1))
      ++nodelet;
  }
  return la;
}

// ---------------------------------------------------------------------------
// Similarity (host)

void SimilarityWeights::validate() const {
  const double ws[] = {w_type, w_degree, w_neighbor_type, w_edge_type, w_attr};
  double sum = 0;
  for (double w : ws) {
    if (w < 0) throw ConfigError("similarity weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("similarity weights must sum to 1");
}

std::uint64_t sigma_rw_count(std::uint64_t deg_u, std::uint64_t deg_v, std::uint64_t attrs_u,
                             std::uint64_t attrs_v) {
  return 4 + 4 + (deg_u + deg_v + 2) + (deg_u + deg_v + 2) + (attrs_u + attrs_v + 2);
}

namespace {

double jaccard_sorted(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  if (a.empty() && b.empty()) return 1.0;  // empty-vs-empty counts as identical
  std::size_t i = 0, j = 0;
  std::uint64_t inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  std::uint64_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double degree_similarity(std::uint64_t du, std::uint64_t dv) {
  std::uint64_t mx = std::max({du, dv, std::uint64_t{1}});
  std::uint64_t diff = du > dv ? du - dv : dv - du;
  return 1.0 - static_cast<double>(diff) / static_cast<double>(mx);
}

// Shared accumulation order keeps host and machine scores bit-identical.
double combine_score(const SimilarityWeights& w, double t, double d, double nv, double ne,
                     double at) {
  double run = 0.0;
  run += w.w_type * t;
  run += w.w_degree * d;
  run += w.w_neighbor_type * nv;
  run += w.w_edge_type * ne;
  run += w.w_attr * at;
  return run;
}

}  // namespace

SigmaResult sigma_host(const GraphMetadata& m1, std::uint64_t u, const GraphMetadata& m2,
                       std::uint64_t v, const SimilarityWeights& w) {
  double t = m1.vtype[u] == m2.vtype[v] ? 1.0 : 0.0;
  double d = degree_similarity(m1.degree[u], m2.degree[v]);
  double nv = jaccard_sorted(m1.ntypes[u], m2.ntypes[v]);
  double ne = jaccard_sorted(m1.etypes[u], m2.etypes[v]);
  double at = jaccard_sorted(m1.attrs[u], m2.attrs[v]);
  SigmaResult r;
  r.score = combine_score(w, t, d, nv, ne, at);
  r.rw_count = sigma_rw_count(m1.degree[u], m2.degree[v], m1.attrs[u].size(), m2.attrs[v].size());
  return r;
}

bool topk_order(const TopKEntry& a, const TopKEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.candidate < b.candidate;
}

void topk_insert(std::vector<TopKEntry>& list, TopKEntry e, std::uint32_t k) {
  auto it = std::lower_bound(list.begin(), list.end(), e, topk_order);
  list.insert(it, e);
  if (list.size() > k) list.pop_back();
}

// ---------------------------------------------------------------------------
// Machine-side structures

Scheme scheme_from_string(const std::string& s) {
  if (s == "all" || s == "ALL" || s == "0") return Scheme::all;
  if (s == "pair" || s == "PAIR" || s == "1") return Scheme::pair;
  throw ParseError("unknown scheme: " + s);
}

const char* to_string(Scheme s) { return s == Scheme::all ? "ALL" : "PAIR"; }

namespace {

struct DeviceGraph {
  std::vector<GlobalAddress> type_addr;
  std::vector<GlobalAddress> deg_addr;
  std::vector<GlobalAddress> ntype_base;
  std::vector<GlobalAddress> etype_base;
  std::vector<GlobalAddress> attr_base;
};

DeviceGraph install_graph(Machine& m, const GraphMetadata& meta,
                          const std::vector<std::uint32_t>& vertex_nodelet,
                          const std::string& name) {
  std::uint32_t p = m.total_nodelets();
  std::uint64_t n = meta.vtype.size();
  std::vector<std::uint64_t> words(p, 0);
  for (std::uint64_t v = 0; v < n; ++v)
    words[vertex_nodelet[v]] += 2 + 2 * meta.degree[v] + meta.attrs[v].size();
  std::vector<GlobalAddress> region(p);
  for (std::uint32_t i = 0; i < p; ++i)
    region[i] = m.alloc(i, words[i] ? words[i] : 1, name + "[meta@" + std::to_string(i) + "]");
  std::vector<std::uint64_t> cursor(p, 0);

  DeviceGraph d;
  d.type_addr.resize(n);
  d.deg_addr.resize(n);
  d.ntype_base.resize(n);
  d.etype_base.resize(n);
  d.attr_base.resize(n);
  for (std::uint64_t v = 0; v < n; ++v) {
    std::uint32_t node = vertex_nodelet[v];
    GlobalAddress base = region[node].plus(cursor[node]);
    std::uint64_t deg = meta.degree[v];
    d.type_addr[v] = base;
    d.deg_addr[v] = base.plus(1);
    d.ntype_base[v] = base.plus(2);
    d.etype_base[v] = base.plus(2 + deg);
    d.attr_base[v] = base.plus(2 + 2 * deg);
    cursor[node] += 2 + 2 * deg + meta.attrs[v].size();
    m.poke(d.type_addr[v], meta.vtype[v]);
    m.poke(d.deg_addr[v], static_cast<word_t>(deg));
    for (std::uint64_t i = 0; i < deg; ++i) {
      m.poke(d.ntype_base[v].plus(i), meta.ntypes[v][i]);
      m.poke(d.etype_base[v].plus(i), meta.etypes[v][i]);
    }
    for (std::uint64_t i = 0; i < meta.attrs[v].size(); ++i)
      m.poke(d.attr_base[v].plus(i), meta.attrs[v][i]);
  }
  return d;
}

struct DeviceBuckets {
  std::vector<GlobalAddress> member_base;  // per leaf

  GlobalAddress member_addr(std::uint32_t leaf, std::uint64_t i) const {
    return member_base[leaf].plus(i);
  }
};

DeviceBuckets install_buckets(Machine& m, const QuadTree& qt,
                              const std::vector<std::uint32_t>& bucket_nodelet,
                              const std::string& name) {
  DeviceBuckets d;
  d.member_base.resize(qt.leaves.size());
  for (std::uint32_t leaf = 0; leaf < qt.leaves.size(); ++leaf) {
    const auto& mem = qt.leaves[leaf].members;
    d.member_base[leaf] =
        m.alloc(bucket_nodelet[leaf], mem.size() ? mem.size() : 1,
                name + "[bucket " + std::to_string(leaf) + "]");
    for (std::uint64_t i = 0; i < mem.size(); ++i)
      m.poke(d.member_base[leaf].plus(i), static_cast<word_t>(mem[i]));
  }
  return d;
}

struct SimShared {
  SimInputs in;
  std::uint32_t k = 5;
  SimilarityWeights w;
  DeviceGraph dev1, dev2;
  DeviceBuckets buckets1, buckets2;
  std::vector<GlobalAddress> scratch;                  // per qt2 leaf
  std::vector<std::vector<std::uint32_t>> neighbors;   // per qt2 leaf
  std::vector<std::uint64_t> stat_base;                // prefix into task_stats
  std::vector<PairTaskStat> task_stats;
  TopKList topk;
  std::uint64_t measured_sigma_rw = 0;
  std::uint64_t intra_bucket_migrations = 0;
};

// One similarity evaluation on the machine. Reads u's metadata block at its
// placement, then returns to the similarity cell, then scans v's block (all
// local when v is co-resident with the task bucket), and finally performs
// the five read-and-update pairs on the similarity cell. Traffic is exactly
// sigma_rw_count words.
SimTask<SigmaResult> sigma_on_machine(Ctx& ctx, SimShared* sh, std::uint64_t u, std::uint64_t v,
                                      GlobalAddress scratch) {
  const GraphMetadata& m1 = *sh->in.m1;
  const GraphMetadata& m2 = *sh->in.m2;
  std::uint64_t deg_u = m1.degree[u];
  std::uint64_t deg_v = m2.degree[v];
  std::uint64_t na_u = m1.attrs[u].size();
  std::uint64_t na_v = m2.attrs[v].size();

  std::uint64_t rw0 = ctx.stats().reads_and_writes();

  word_t type_u = co_await ctx.read(sh->dev1.type_addr[u]);
  word_t dg_u = co_await ctx.read(sh->dev1.deg_addr[u]);
  std::vector<std::uint32_t> nt_u(deg_u), et_u(deg_u), at_u(na_u);
  for (std::uint64_t i = 0; i < deg_u; ++i)
    nt_u[i] = static_cast<std::uint32_t>(co_await ctx.read(sh->dev1.ntype_base[u].plus(i)));
  for (std::uint64_t i = 0; i < deg_u; ++i)
    et_u[i] = static_cast<std::uint32_t>(co_await ctx.read(sh->dev1.etype_base[u].plus(i)));
  for (std::uint64_t i = 0; i < na_u; ++i)
    at_u[i] = static_cast<std::uint32_t>(co_await ctx.read(sh->dev1.attr_base[u].plus(i)));

  co_await ctx.read(scratch);  // first accumulator read; returns to the task nodelet

  std::uint64_t mig0 = ctx.stats().migrations;
  word_t type_v = co_await ctx.read(sh->dev2.type_addr[v]);
  word_t dg_v = co_await ctx.read(sh->dev2.deg_addr[v]);
  std::vector<std::uint32_t> nt_v(deg_v), et_v(deg_v), at_v(na_v);
  for (std::uint64_t i = 0; i < deg_v; ++i)
    nt_v[i] = static_cast<std::uint32_t>(co_await ctx.read(sh->dev2.ntype_base[v].plus(i)));
  for (std::uint64_t i = 0; i < deg_v; ++i)
    et_v[i] = static_cast<std::uint32_t>(co_await ctx.read(sh->dev2.etype_base[v].plus(i)));
  for (std::uint64_t i = 0; i < na_v; ++i)
    at_v[i] = static_cast<std::uint32_t>(co_await ctx.read(sh->dev2.attr_base[v].plus(i)));
  sh->intra_bucket_migrations += ctx.stats().migrations - mig0;

  double t = type_u == type_v ? 1.0 : 0.0;
  double d = degree_similarity(static_cast<std::uint64_t>(dg_u), static_cast<std::uint64_t>(dg_v));
  double nv = jaccard_sorted(nt_u, nt_v);
  double ne = jaccard_sorted(et_u, et_v);
  double at = jaccard_sorted(at_u, at_v);

  double run = 0.0;
  run += sh->w.w_type * t;
  co_await ctx.write(scratch, word_from_double(run));
  co_await ctx.read(scratch);
  run += sh->w.w_degree * d;
  co_await ctx.write(scratch, word_from_double(run));
  co_await ctx.read(scratch);
  run += sh->w.w_neighbor_type * nv;
  co_await ctx.write(scratch, word_from_double(run));
  co_await ctx.read(scratch);
  run += sh->w.w_edge_type * ne;
  co_await ctx.write(scratch, word_from_double(run));
  co_await ctx.read(scratch);
  run += sh->w.w_attr * at;
  co_await ctx.write(scratch, word_from_double(run));

  SigmaResult r;
  r.score = run;
  r.rw_count = ctx.stats().reads_and_writes() - rw0;
  co_return r;
}

SimTask<void> all_task(Ctx& ctx, SimShared* sh, std::uint32_t leaf) {
  const Bucket& bucket = sh->in.qt2->leaves[leaf];
  GlobalAddress scratch = sh->scratch[leaf];
  const auto& neigh = sh->neighbors[leaf];
  for (std::uint64_t vi = 0; vi < bucket.members.size(); ++vi) {
    word_t vid = co_await ctx.read(sh->buckets2.member_addr(leaf, vi));
    auto v = static_cast<std::uint64_t>(vid);
    for (std::uint32_t pos = 0; pos < neigh.size(); ++pos) {
      std::uint32_t b1 = neigh[pos];
      PairTaskStat& st = sh->task_stats[sh->stat_base[leaf] + pos];
      const Bucket& bp = sh->in.qt1->leaves[b1];
      for (std::uint64_t ui = 0; ui < bp.members.size(); ++ui) {
        word_t uid = co_await ctx.read(sh->buckets1.member_addr(b1, ui));
        auto u = static_cast<std::uint64_t>(uid);
        SigmaResult sr = co_await sigma_on_machine(ctx, sh, u, v, scratch);
        st.sigma_rw += sr.rw_count;
        sh->measured_sigma_rw += sr.rw_count;
        topk_insert(sh->topk[v], {u, sr.score}, sh->k);
      }
    }
  }
}

using PartialLists = std::vector<std::vector<TopKEntry>>;  // per member of B

SimTask<void> pair_aux_task(Ctx& ctx, SimShared* sh, std::uint32_t leaf, std::uint32_t pos,
                            PartialLists* partial) {
  const Bucket& bucket = sh->in.qt2->leaves[leaf];
  GlobalAddress scratch = sh->scratch[leaf];
  std::uint32_t b1 = sh->neighbors[leaf][pos];
  PairTaskStat& st = sh->task_stats[sh->stat_base[leaf] + pos];
  const Bucket& bp = sh->in.qt1->leaves[b1];
  for (std::uint64_t vi = 0; vi < bucket.members.size(); ++vi) {
    word_t vid = co_await ctx.read(sh->buckets2.member_addr(leaf, vi));
    auto v = static_cast<std::uint64_t>(vid);
    for (std::uint64_t ui = 0; ui < bp.members.size(); ++ui) {
      word_t uid = co_await ctx.read(sh->buckets1.member_addr(b1, ui));
      auto u = static_cast<std::uint64_t>(uid);
      SigmaResult sr = co_await sigma_on_machine(ctx, sh, u, v, scratch);
      st.sigma_rw += sr.rw_count;
      sh->measured_sigma_rw += sr.rw_count;
      topk_insert((*partial)[vi], {u, sr.score}, sh->k);
    }
  }
}

SimTask<void> pair_parent_task(Ctx& ctx, SimShared* sh, std::uint32_t leaf,
                               std::uint64_t aux_seed) {
  const Bucket& bucket = sh->in.qt2->leaves[leaf];
  const auto& neigh = sh->neighbors[leaf];
  auto partials = std::make_shared<std::vector<PartialLists>>(neigh.size());
  for (auto& pl : *partials) pl.resize(bucket.members.size());

  std::vector<std::uint32_t> order(neigh.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(aux_seed);
  shuffle_with(order, rng);

  std::uint32_t here = ctx.current_nodelet();
  for (std::uint32_t pos : order) {
    TaskFn f = [sh, leaf, pos, partials](Ctx& c) {
      return pair_aux_task(c, sh, leaf, pos, &(*partials)[pos]);
    };
    co_await ctx.spawn(here, std::move(f));
  }
  co_await ctx.sync_children();

  // Merge partial lists in canonical pair order.
  for (std::uint64_t vi = 0; vi < bucket.members.size(); ++vi) {
    std::uint64_t v = bucket.members[vi];
    for (std::uint32_t pos = 0; pos < neigh.size(); ++pos)
      for (const TopKEntry& e : (*partials)[pos][vi]) topk_insert(sh->topk[v], e, sh->k);
  }
}

SimTask<void> sim_root(Ctx& ctx, SimShared* sh, Scheme scheme, std::uint64_t shuffle_seed,
                       const std::vector<std::uint32_t>* spawn_order) {
  if (scheme == Scheme::all) {
    for (std::uint32_t leaf : *spawn_order) {
      std::uint32_t at = sh->in.l2->bucket_nodelet[leaf];
      TaskFn f = [sh, leaf](Ctx& c) { return all_task(c, sh, leaf); };
      co_await ctx.spawn(at, std::move(f));
    }
  } else {
    Rng rng(shuffle_seed);
    for (std::uint32_t leaf : *spawn_order) {
      std::uint32_t at = sh->in.l2->bucket_nodelet[leaf];
      std::uint64_t aux_seed = rng.next_u64();
      TaskFn f = [sh, leaf, aux_seed](Ctx& c) { return pair_parent_task(c, sh, leaf, aux_seed); };
      co_await ctx.spawn(at, std::move(f));
    }
  }
  co_await ctx.sync_children();
}

SimRunResult run_sim(Machine& m, const SimInputs& in, std::uint32_t k,
                     const SimilarityWeights& w, Scheme scheme, std::uint64_t shuffle_seed) {
  if (!in.g1 || !in.g2 || !in.m1 || !in.m2 || !in.qt1 || !in.qt2 || !in.l1 || !in.l2)
    throw ConfigError("parallel_sim: incomplete inputs");
  if (k < 1) throw ConfigError("parallel_sim: k must be >= 1");
  w.validate();

  auto sh = std::make_shared<SimShared>();
  sh->in = in;
  sh->k = k;
  sh->w = w;
  sh->dev1 = install_graph(m, *in.m1, in.l1->vertex_nodelet, "gsana.g1");
  sh->dev2 = install_graph(m, *in.m2, in.l2->vertex_nodelet, "gsana.g2");
  sh->buckets1 = install_buckets(m, *in.qt1, in.l1->bucket_nodelet, "gsana.qt1");
  sh->buckets2 = install_buckets(m, *in.qt2, in.l2->bucket_nodelet, "gsana.qt2");

  std::uint64_t nleaves2 = in.qt2->leaves.size();
  sh->scratch.resize(nleaves2);
  for (std::uint32_t leaf = 0; leaf < nleaves2; ++leaf)
    sh->scratch[leaf] =
        m.alloc(in.l2->bucket_nodelet[leaf], 1, "gsana.sim[" + std::to_string(leaf) + "]");

  sh->neighbors.resize(nleaves2);
  sh->stat_base.resize(nleaves2);
  std::uint64_t nstats = 0;
  for (std::uint32_t leaf = 0; leaf < nleaves2; ++leaf) {
    sh->neighbors[leaf] = neighbor_buckets(*in.qt1, in.qt2->leaves[leaf]);
    sh->stat_base[leaf] = nstats;
    nstats += sh->neighbors[leaf].size();
  }
  sh->task_stats.resize(nstats);
  for (std::uint32_t leaf = 0; leaf < nleaves2; ++leaf) {
    for (std::uint32_t pos = 0; pos < sh->neighbors[leaf].size(); ++pos) {
      PairTaskStat& st = sh->task_stats[sh->stat_base[leaf] + pos];
      st.b2_leaf = leaf;
      st.b1_leaf = sh->neighbors[leaf][pos];
      st.b_size = in.qt2->leaves[leaf].members.size();
      st.bp_size = in.qt1->leaves[st.b1_leaf].members.size();
    }
  }
  sh->topk.assign(in.g2->n, {});

  // Spawn order: ALL sorts by estimated load descending; PAIR shuffles.
  std::vector<std::uint32_t> order(nleaves2);
  for (std::uint32_t i = 0; i < nleaves2; ++i) order[i] = i;
  if (scheme == Scheme::all) {
    std::vector<std::uint64_t> load(nleaves2, 0);
    for (std::uint32_t leaf = 0; leaf < nleaves2; ++leaf) {
      std::uint64_t cands = 0;
      for (std::uint32_t b1 : sh->neighbors[leaf]) cands += in.qt1->leaves[b1].members.size();
      load[leaf] = in.qt2->leaves[leaf].members.size() * cands;
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (load[a] != load[b]) return load[a] > load[b];
      return a < b;
    });
  } else {
    Rng rng(shuffle_seed ^ 0x5bf0a8b1461f8c3dULL);
    shuffle_with(order, rng);
  }

  EventCounters before = m.counters();
  auto order_ptr = std::make_shared<std::vector<std::uint32_t>>(std::move(order));
  m.spawn_at(0, [sh, scheme, shuffle_seed, order_ptr](Ctx& ctx) {
    return sim_root(ctx, sh.get(), scheme, shuffle_seed, order_ptr.get());
  });
  m.run_until_idle();

  SimRunResult res;
  res.topk = std::move(sh->topk);
  res.counters = m.counters() - before;
  res.time.makespan_cycles = res.counters.max_busy_cycles();
  res.time.seconds = static_cast<double>(res.time.makespan_cycles) / m.config().clock_hz;
  res.task_stats = std::move(sh->task_stats);
  res.measured_sigma_rw = sh->measured_sigma_rw;
  res.intra_bucket_migrations = sh->intra_bucket_migrations;
  res.formula_sigma_rw = 0;
  for (const PairTaskStat& st : res.task_stats) {
    const Bucket& b2 = in.qt2->leaves[st.b2_leaf];
    const Bucket& b1 = in.qt1->leaves[st.b1_leaf];
    for (std::uint64_t v : b2.members)
      for (std::uint64_t u : b1.members)
        res.formula_sigma_rw +=
            sigma_rw_count(in.m1->degree[u], in.m2->degree[v], in.m1->attrs[u].size(),
                           in.m2->attrs[v].size());
  }
  if (scheme == Scheme::all) {
    res.tasks = nleaves2;
  } else {
    res.tasks = 0;
    for (const auto& nb : sh->neighbors) res.tasks += nb.size();
  }
  return res;
}

}  // namespace

SimRunResult parallel_sim_all(Machine& m, const SimInputs& in, std::uint32_t k,
                              const SimilarityWeights& w) {
  return run_sim(m, in, k, w, Scheme::all, 0);
}

SimRunResult parallel_sim_pair(Machine& m, const SimInputs& in, std::uint32_t k,
                               const SimilarityWeights& w, std::uint64_t shuffle_seed) {
  return run_sim(m, in, k, w, Scheme::pair, shuffle_seed);
}

double gsana_bandwidth(const std::vector<PairTaskStat>& stats, double seconds) {
  if (!(seconds > 0.0)) throw ConfigError("gsana_bandwidth: time must be positive");
  long double bytes = 0;
  for (const PairTaskStat& st : stats)
    bytes += static_cast<long double>(st.b_size + st.b_size * st.bp_size + st.sigma_rw) * 8.0L;
  return static_cast<double>(bytes / seconds);
}

// ---------------------------------------------------------------------------
// Synthetic aligned pairs

std::uint64_t target_edge_count(std::uint64_t nvertices) {
  // Edge/vertex ratios at vertex counts 2^9 .. 2^15, linear in log2(n).
  static const double ratio[] = {2.6, 4.4, 7.0, 8.75, 11.0, 11.625, 12.03125};
  double l = std::log2(static_cast<double>(nvertices));
  double r;
  if (l <= 9.0) {
    r = ratio[0];
  } else if (l >= 15.0) {
    r = ratio[6];
  } else {
    auto lo = static_cast<std::size_t>(l - 9.0);
    double frac = (l - 9.0) - static_cast<double>(lo);
    r = ratio[lo] * (1.0 - frac) + ratio[lo + 1] * frac;
  }
  auto m = static_cast<std::uint64_t>(std::llround(r * static_cast<double>(nvertices)));
  std::uint64_t max_edges = nvertices * (nvertices - 1) / 2;
  return std::min(m, max_edges);
}

std::uint32_t default_bucket_cap(std::uint64_t nvertices) {
  double l = std::log2(static_cast<double>(nvertices < 2 ? 2 : nvertices));
  auto li = static_cast<std::int64_t>(std::ceil(l));
  li = std::max<std::int64_t>(9, std::min<std::int64_t>(15, li));
  return 32u << static_cast<std::uint32_t>((li - 9) / 2);
}

namespace {

constexpr std::uint32_t kVertexTypes = 4;
constexpr std::uint32_t kEdgeTypes = 3;
constexpr std::uint32_t kAttrUniverse = 16;
constexpr std::uint32_t kMaxAttrs = 4;

std::uint64_t edge_key(std::uint64_t s, std::uint64_t d, std::uint64_t n) {
  if (s > d) std::swap(s, d);
  return s * n + d;
}

}  // namespace

AlignedPair gen_aligned_pair(std::uint64_t nvertices, std::uint64_t seed,
                             const PerturbSpec& perturb) {
  if (nvertices < 2) throw ConfigError("gen_aligned_pair: need at least 2 vertices");
  Rng rng(seed);
  std::uint64_t n = nvertices;
  std::uint64_t m = target_edge_count(n);

  AttributedGraph g1;
  g1.n = n;
  g1.adj.resize(n);
  g1.adj_etype.resize(n);

  // RMAT-flavored skewed endpoints, unique undirected edges.
  std::uint32_t scale = 0;
  while ((1ull << scale) < n) ++scale;
  if (scale == 0) scale = 1;
  constexpr double a = 0.57, b = 0.19, c = 0.19;
  std::unordered_set<std::uint64_t> seen;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> edges;
  std::vector<std::uint32_t> etypes;
  std::uint64_t attempts = 0, max_attempts = 400 * m + 1000;
  while (edges.size() < m && attempts < max_attempts) {
    ++attempts;
    std::uint64_t s = 0, d = 0;
    for (std::uint32_t bit = 0; bit < scale; ++bit) {
      double r = rng.next_double();
      std::uint64_t sb, db;
      if (r < a) {
        sb = 0, db = 0;
      } else if (r < a + b) {
        sb = 0, db = 1;
      } else if (r < a + b + c) {
        sb = 1, db = 0;
      } else {
        sb = 1, db = 1;
      }
      s = (s << 1) | sb;
      d = (d << 1) | db;
    }
    if (s >= n || d >= n || s == d) continue;
    std::uint64_t key = edge_key(s, d, n);
    if (!seen.insert(key).second) continue;
    edges.push_back({s, d});
    etypes.push_back(static_cast<std::uint32_t>(rng.next_below(kEdgeTypes)));
  }
  // Deterministic fallback for very dense/small targets.
  for (std::uint64_t s = 0; edges.size() < m && s < n; ++s)
    for (std::uint64_t d = s + 1; edges.size() < m && d < n; ++d)
      if (seen.insert(edge_key(s, d, n)).second) {
        edges.push_back({s, d});
        etypes.push_back(static_cast<std::uint32_t>(rng.next_below(kEdgeTypes)));
      }

  for (std::size_t i = 0; i < edges.size(); ++i)
    g1.add_edge(edges[i].first, edges[i].second, etypes[i]);
  g1.sort_adjacency();

  g1.vtype.resize(n);
  for (std::uint64_t v = 0; v < n; ++v)
    g1.vtype[v] = static_cast<std::uint32_t>(rng.next_below(kVertexTypes));
  g1.attrs.resize(n);
  for (std::uint64_t v = 0; v < n; ++v) {
    auto want = static_cast<std::uint32_t>(rng.next_below(kMaxAttrs + 1));
    std::unordered_set<std::uint32_t> got;
    while (got.size() < want) got.insert(static_cast<std::uint32_t>(rng.next_below(kAttrUniverse)));
    g1.attrs[v].assign(got.begin(), got.end());
    std::sort(g1.attrs[v].begin(), g1.attrs[v].end());
  }

  // --- derive graph 2
  auto n_drop = static_cast<std::uint64_t>(std::llround(perturb.vertex_drop * static_cast<double>(n)));
  auto n_del = static_cast<std::uint64_t>(std::llround(perturb.edge_delete * static_cast<double>(edges.size())));
  auto n_add = static_cast<std::uint64_t>(std::llround(perturb.edge_add * static_cast<double>(edges.size())));

  std::vector<std::uint64_t> ids(n);
  for (std::uint64_t v = 0; v < n; ++v) ids[v] = v;
  shuffle_with(ids, rng);
  std::vector<bool> dropped(n, false);
  for (std::uint64_t i = 0; i < n_drop; ++i) dropped[ids[i]] = true;

  std::vector<std::uint64_t> survivors;
  for (std::uint64_t v = 0; v < n; ++v)
    if (!dropped[v]) survivors.push_back(v);
  if (survivors.size() < 2) throw ConfigError("gen_aligned_pair: perturbation dropped too much");

  std::vector<std::uint64_t> eidx(edges.size());
  for (std::uint64_t i = 0; i < edges.size(); ++i) eidx[i] = i;
  shuffle_with(eidx, rng);
  std::vector<bool> edge_deleted(edges.size(), false);
  for (std::uint64_t i = 0; i < std::min<std::uint64_t>(n_del, edges.size()); ++i)
    edge_deleted[eidx[i]] = true;

  // Permutation over survivors: new id = position in the shuffled list.
  std::vector<std::uint64_t> order = survivors;
  shuffle_with(order, rng);
  std::vector<std::uint64_t> new_id(n, static_cast<std::uint64_t>(-1));
  for (std::uint64_t pos = 0; pos < order.size(); ++pos) new_id[order[pos]] = pos;

  AttributedGraph g2;
  g2.n = survivors.size();
  g2.adj.resize(g2.n);
  g2.adj_etype.resize(g2.n);
  g2.vtype.resize(g2.n);
  g2.attrs.resize(g2.n);
  for (std::uint64_t old : survivors) {
    g2.vtype[new_id[old]] = g1.vtype[old];
    g2.attrs[new_id[old]] = g1.attrs[old];
  }

  std::unordered_set<std::uint64_t> seen2;
  for (std::uint64_t i = 0; i < edges.size(); ++i) {
    if (edge_deleted[i]) continue;
    auto [s, d] = edges[i];
    if (dropped[s] || dropped[d]) continue;
    std::uint64_t ns = new_id[s], nd = new_id[d];
    seen2.insert(edge_key(ns, nd, g2.n));
    g2.add_edge(ns, nd, etypes[i]);
  }
  std::uint64_t added = 0, add_attempts = 0;
  while (added < n_add && add_attempts < 400 * (n_add + 1) + 1000) {
    ++add_attempts;
    std::uint64_t s = rng.next_below(g2.n);
    std::uint64_t d = rng.next_below(g2.n);
    if (s == d) continue;
    if (!seen2.insert(edge_key(s, d, g2.n)).second) continue;
    g2.add_edge(s, d, static_cast<std::uint32_t>(rng.next_below(kEdgeTypes)));
    ++added;
  }
  g2.sort_adjacency();

  AlignedPair pair;
  pair.g1 = std::move(g1);
  pair.g2 = std::move(g2);
  for (std::uint64_t old : survivors) pair.ground_truth.push_back({old, new_id[old]});
  return pair;
}

std::string AlignedPair::to_json() const {
  ordered_json j;
  j["graph1"] = nlohmann::json::parse(g1.to_json());
  j["graph2"] = nlohmann::json::parse(g2.to_json());
  ordered_json gt = ordered_json::array();
  for (const auto& [u, v] : ground_truth) gt.push_back({u, v});
  j["ground_truth"] = gt;
  return j.dump();
}

AlignedPair AlignedPair::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("aligned pair json: ") + e.what());
  }
  AlignedPair p;
  p.g1 = AttributedGraph::from_json_text(j.at("graph1").dump());
  p.g2 = AttributedGraph::from_json_text(j.at("graph2").dump());
  for (const auto& e : j.at("ground_truth"))
    p.ground_truth.push_back({e.at(0).get<std::uint64_t>(), e.at(1).get<std::uint64_t>()});
  return p;
}

AlignedPair AlignedPair::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open pair file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void AlignedPair::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write pair file: " + path);
  out << to_json() << "\n";
}

std::string topk_to_json(const TopKList& topk) {
  ordered_json arr = ordered_json::array();
  for (std::uint64_t v = 0; v < topk.size(); ++v) {
    ordered_json rec;
    rec["v"] = v;
    ordered_json matches = ordered_json::array();
    for (const TopKEntry& e : topk[v]) {
      ordered_json me;
      me["u"] = e.candidate;
      me["score"] = e.score;
      matches.push_back(me);
    }
    rec["matches"] = matches;
    arr.push_back(rec);
  }
  return arr.dump();
}

}  // namespace migrasim::gsana
