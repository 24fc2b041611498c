#ifndef MIGRASIM_BFS_HPP
#define MIGRASIM_BFS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "migrasim/graph.hpp"
#include "migrasim/machine.hpp"

namespace migrasim::bfs {

enum class Algorithm { migrating, remote_writes };
Algorithm algorithm_from_string(const std::string& s);
const char* to_string(Algorithm a);

struct BfsOptions {
  std::uint64_t frontier_grain = 16;  // queue entries per frontier worker
};

struct BfsResult {
  std::vector<std::int64_t> parents;  // -1 = unreached
  std::uint64_t traversed_edges = 0;  // neighbor ids scanned from frontiers
  std::uint64_t levels = 0;           // depth of the deepest reached vertex
  SimTime time;
  EventCounters counters;
  // Migrations measured across the parent-claim step of the traversal phase:
  // reads+CAS for the migrating algorithm, remote writes (always zero) for
  // the remote-write algorithm.
  std::uint64_t claim_migrations = 0;
};

// Algorithm 1: frontier threads walk their local queue slice and claim each
// neighbor with a read + compare-and-swap at the neighbor's home nodelet.
BfsResult bfs_migrating(Machine& m, const graph::BlockGraph& g, std::uint64_t root,
                        const BfsOptions& opts = {});

// Algorithm 2: the traversal phase only fires remote writes into the
// new-parent array (later writes overwrite earlier ones); after the barrier
// a per-nodelet scan promotes freshly claimed vertices into the frontier.
BfsResult bfs_remote_writes(Machine& m, const graph::BlockGraph& g, std::uint64_t root,
                            const BfsOptions& opts = {});

struct ValidationCheck {
  std::string name;
  bool pass = false;
  std::string witness;
};

struct ValidationReport {
  std::array<ValidationCheck, 5> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// Graph500-style tree validation against a flat reference adjacency:
// (1) parents[root] = root, (2) acyclic parent chains reaching the root,
// (3) tree edges exist in the graph, (4) levels across any graph edge differ
// by at most one, (5) exactly the root's component is reached.
ValidationReport validate_bfs(const std::vector<std::vector<std::uint64_t>>& adj,
                              const BfsResult& result, std::uint64_t root);

// Host-side reference: depth per vertex, -1 if unreachable.
std::vector<std::int64_t> serial_bfs_depths(const std::vector<std::vector<std::uint64_t>>& adj,
                                            std::uint64_t root);

// Depths implied by a parent array (-1 where unreached or on a broken chain).
std::vector<std::int64_t> depths_from_parents(const std::vector<std::int64_t>& parents,
                                              std::uint64_t root);

struct BfsMetrics {
  double teps = 0.0;
  double bw_bytes_per_s = 0.0;  // TEPS x 2 x 8
};

BfsMetrics bfs_metrics(std::uint32_t scale, std::uint32_t edge_factor, double seconds);

}  // namespace migrasim::bfs

#endif
