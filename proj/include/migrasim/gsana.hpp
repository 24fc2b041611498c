#ifndef MIGRASIM_GSANA_HPP
#define MIGRASIM_GSANA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "migrasim/machine.hpp"

namespace migrasim::gsana {

// Vertex-typed, edge-typed, attributed graph with sorted adjacency.
struct AttributedGraph {
  std::uint64_t n = 0;
  std::vector<std::vector<std::uint64_t>> adj;        // sorted ascending
  std::vector<std::vector<std::uint32_t>> adj_etype;  // parallel to adj
  std::vector<std::uint32_t> vtype;
  std::vector<std::vector<std::uint32_t>> attrs;  // sorted, duplicate-free

  std::uint64_t degree(std::uint64_t v) const { return adj[v].size(); }
  std::uint64_t nedges() const;
  void add_edge(std::uint64_t s, std::uint64_t d, std::uint32_t etype);
  void sort_adjacency();

  std::string to_json() const;
  static AttributedGraph from_json_text(const std::string& text);
};

// Sorted per-vertex metadata arrays the similarity function scans.
struct GraphMetadata {
  std::vector<std::uint32_t> vtype;
  std::vector<std::uint64_t> degree;
  std::vector<std::vector<std::uint32_t>> ntypes;  // neighbor vertex types, sorted
  std::vector<std::vector<std::uint32_t>> etypes;  // incident edge types, sorted
  std::vector<std::vector<std::uint32_t>> attrs;   // sorted unique

  static GraphMetadata from(const AttributedGraph& g);
};

// ---------------------------------------------------------------------------
// Placement and bucketing

struct PlacedVertex {
  std::uint64_t id = 0;
  double x = 0.0;
  double y = 0.0;
};

// Deterministic 2D embedding: x = hop distance from the max-degree anchor
// normalized by (max hop + 1) (unreachable vertices sit just inside 1);
// y = log2(1+deg) / log2(1+max deg).
std::vector<PlacedVertex> place_vertices(const AttributedGraph& g);

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
};

struct Bucket {
  Rect rect;
  std::uint32_t depth = 0;
  std::uint64_t cell_x = 0, cell_y = 0;  // grid coords at this depth
  std::vector<std::uint64_t> members;    // vertex ids ascending
  std::uint64_t hilbert = 0;             // center-cell rank (see hilbert_rank)
};

struct QuadTree {
  std::uint32_t bucket_cap = 32;
  std::uint32_t max_depth = 16;
  std::vector<Bucket> leaves;                // non-empty leaves, creation order
  std::vector<std::uint32_t> hilbert_order;  // leaf indices by (hilbert, creation)
};

// Recursive 4-way split at rectangle midpoints until every leaf holds at
// most b_cap points or the depth cap; boundary points go to the
// higher-coordinate child. Only non-empty leaves are kept.
QuadTree build_quadtree(const std::vector<PlacedVertex>& placed, std::uint32_t b_cap,
                        std::uint32_t max_depth = 16);

// Rank along the order-`order` Hilbert curve; the first-order curve visits
// (0,0),(0,1),(1,1),(1,0) in ranks 0..3.
std::uint64_t hilbert_rank(std::uint64_t ix, std::uint64_t iy, std::uint32_t order);

// Non-empty leaves of qt1 whose closed rectangles touch b's closed
// rectangle, in Hilbert-rank order.
std::vector<std::uint32_t> neighbor_buckets(const QuadTree& qt1, const Bucket& b);

// ---------------------------------------------------------------------------
// Layouts

enum class Layout { blk, hcb };
Layout layout_from_string(const std::string& s);
const char* to_string(Layout l);

struct LayoutAssignment {
  Layout mode = Layout::blk;
  std::vector<std::uint32_t> vertex_nodelet;  // per vertex id
  std::vector<std::uint32_t> bucket_nodelet;  // per leaf (creation index)
  std::vector<std::uint32_t> bucket_order;    // leaf indices in assignment order
  std::vector<std::uint64_t> renamed_id;      // HCB contiguous renaming; BLK identity
};

// BLK: vertices in equal contiguous id blocks, buckets in equal contiguous
// creation-order blocks. HCB: buckets sorted by Hilbert rank, vertices
// renamed contiguously by bucket rank and co-located with their bucket;
// contiguous bucket groups balance incident-edge counts per nodelet.
LayoutAssignment assign_layout(const QuadTree& qt, const AttributedGraph& g, Layout mode,
                               std::uint32_t p);

// ---------------------------------------------------------------------------
// Similarity

struct SimilarityWeights {
  double w_type = 0.2;
  double w_degree = 0.2;
  double w_neighbor_type = 0.2;
  double w_edge_type = 0.2;
  double w_attr = 0.2;
  void validate() const;  // non-negative, sum to 1 within 1e-12
};

struct SigmaResult {
  double score = 0.0;
  std::uint64_t rw_count = 0;
};

// Reads-and-writes accounting per pair: 4 (type) + 4 (degree) +
// (|N(u)|+|N(v)|+2) twice (neighbor and edge types) + (|A(u)|+|A(v)|+2).
std::uint64_t sigma_rw_count(std::uint64_t deg_u, std::uint64_t deg_v, std::uint64_t attrs_u,
                             std::uint64_t attrs_v);

// Pure host-side similarity score (also the oracle path).
SigmaResult sigma_host(const GraphMetadata& m1, std::uint64_t u, const GraphMetadata& m2,
                       std::uint64_t v, const SimilarityWeights& w);

struct TopKEntry {
  std::uint64_t candidate = 0;  // u in V1
  double score = 0.0;
};

// Score descending, candidate id ascending.
bool topk_order(const TopKEntry& a, const TopKEntry& b);
void topk_insert(std::vector<TopKEntry>& list, TopKEntry e, std::uint32_t k);

using TopKList = std::vector<std::vector<TopKEntry>>;  // per v in V2

// ---------------------------------------------------------------------------
// Parallel similarity schemes

enum class Scheme { all, pair };
Scheme scheme_from_string(const std::string& s);
const char* to_string(Scheme s);

struct PairTaskStat {
  std::uint32_t b2_leaf = 0;
  std::uint32_t b1_leaf = 0;
  std::uint64_t b_size = 0;
  std::uint64_t bp_size = 0;
  std::uint64_t sigma_rw = 0;
};

struct SimRunResult {
  TopKList topk;
  SimTime time;
  EventCounters counters;
  std::vector<PairTaskStat> task_stats;  // per (B,B') in canonical order
  std::uint64_t tasks = 0;               // comparison threadlets spawned
  std::uint64_t measured_sigma_rw = 0;   // simulator reads+writes inside sigma
  std::uint64_t formula_sigma_rw = 0;    // host-computed RW sum
  std::uint64_t intra_bucket_migrations = 0;  // migrations on own-bucket reads
};

struct SimInputs {
  const AttributedGraph* g1 = nullptr;
  const AttributedGraph* g2 = nullptr;
  const GraphMetadata* m1 = nullptr;
  const GraphMetadata* m2 = nullptr;
  const QuadTree* qt1 = nullptr;
  const QuadTree* qt2 = nullptr;
  const LayoutAssignment* l1 = nullptr;
  const LayoutAssignment* l2 = nullptr;
};

// One task per non-empty bucket of qt2, spawned at the bucket's nodelet in
// descending estimated-load order.
SimRunResult parallel_sim_all(Machine& m, const SimInputs& in, std::uint32_t k,
                              const SimilarityWeights& w);

// One sub-task per (B, B') pair with private partial lists merged after the
// sync; bucket and pair spawn order shuffled by the seed.
SimRunResult parallel_sim_pair(Machine& m, const SimInputs& in, std::uint32_t k,
                               const SimilarityWeights& w, std::uint64_t shuffle_seed);

// Sum over tasks of (|B| + |B||B'| + sigma RW) x 8 bytes, over time.
double gsana_bandwidth(const std::vector<PairTaskStat>& stats, double seconds);

// ---------------------------------------------------------------------------
// Synthetic aligned pairs

struct PerturbSpec {
  double edge_delete = 0.10;
  double edge_add = 0.05;
  double vertex_drop = 0.05;
};

struct AlignedPair {
  AttributedGraph g1;
  AttributedGraph g2;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ground_truth;  // (id in g1, id in g2)

  std::string to_json() const;
  static AlignedPair from_json_text(const std::string& text);
  static AlignedPair load(const std::string& path);
  void save(const std::string& path) const;
};

// Seeded generator: graph 1 is an RMAT-flavored attributed graph whose edge
// count follows the bundled size-to-edges ratio table; graph 2 is a
// perturbed, id-permuted derivative with recorded ground truth.
AlignedPair gen_aligned_pair(std::uint64_t nvertices, std::uint64_t seed,
                             const PerturbSpec& perturb = {});

// Edge-count target for a given vertex count (interpolated ratio table).
std::uint64_t target_edge_count(std::uint64_t nvertices);

// Default quad-tree bucket capacity per pair size (32 at 512 vertices,
// doubling every two size steps up to 256 at 32768).
std::uint32_t default_bucket_cap(std::uint64_t nvertices);

std::string topk_to_json(const TopKList& topk);

}  // namespace migrasim::gsana

#endif
