#ifndef MIGRASIM_SPMV_HPP
#define MIGRASIM_SPMV_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "migrasim/dds.hpp"
#include "migrasim/machine.hpp"

namespace migrasim::spmv {

// Host-side CSR content; installed into machine memory by DistCsr::build.
struct SparseMatrix {
  std::uint64_t nrows = 0;
  std::uint64_t ncols = 0;
  // Per row, (column, value) sorted by column, columns unique.
  std::vector<std::vector<std::pair<std::uint64_t, double>>> rows;

  std::uint64_t nnz() const {
    std::uint64_t s = 0;
    for (const auto& r : rows) s += r.size();
    return s;
  }
  static SparseMatrix identity(std::uint64_t n);
};

struct LaplacianSpec {
  std::uint64_t n = 1;
  std::uint32_t d = 2;
  std::uint32_t k = 5;
};

// 5-point stencil on an n-by-n grid: 4 on the diagonal, -1 to grid
// neighbors, rows sorted by column. Only d=2, k=5 is supported.
SparseMatrix gen_laplacian(const LaplacianSpec& spec);

// Matrix Market coordinate reader: real/integer/pattern entries, general or
// symmetric, 1-based indices, duplicates summed, symmetric files expanded to
// full storage. Parse failures carry the offending line number.
SparseMatrix load_matrix_market(const std::string& path);
SparseMatrix parse_matrix_market(std::istream& in, const std::string& origin);

enum class XLayout { replicated, striped };
XLayout x_layout_from_string(const std::string& s);
const char* to_string(XLayout l);

struct GrainSpec {
  enum class Mode { fixed, dynamic_threads } mode = Mode::fixed;
  std::uint64_t value = 16;

  static GrainSpec fixed(std::uint64_t rows_per_thread) {
    return {Mode::fixed, rows_per_thread};
  }
  static GrainSpec dynamic_threads(std::uint64_t target_threads) {
    return {Mode::dynamic_threads, target_threads};
  }
  std::uint64_t grain_for(std::uint64_t nrows) const;
  std::string to_string() const;
};

struct RowRange {
  std::uint32_t nodelet = 0;  // spawn nodelet: first row's home
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

std::vector<RowRange> partition_rows(std::uint64_t nrows, const GrainSpec& grain, std::uint32_t p);

// Fig-2 style distributed CSR: striped per-row lengths, per-row column and
// value chunks co-located with the row's stripe slot.
struct DistCsr {
  std::uint64_t nrows = 0;
  std::uint64_t ncols = 0;
  std::uint64_t nnz = 0;
  StripedArray row_lengths;
  JaggedLocalArray cols;
  JaggedLocalArray vals;

  static DistCsr build(Machine& m, const SparseMatrix& a);
};

struct SpmvResult {
  std::vector<double> y;
  SimTime time;
  EventCounters counters;
  std::uint64_t threads = 0;              // worker threadlets spawned
  std::uint64_t compute_migrations = 0;   // within-row element accesses
  std::uint64_t advance_migrations = 0;   // hops between consecutive rows
};

// y = A x on the machine. Each worker owns a contiguous row range; x reads
// go to the local replica or migrate to the striped owner per layout; y is
// stored with remote writes. The machine must not have run yet.
SpmvResult spmv_run(Machine& m, const SparseMatrix& a, const std::vector<double>& x,
                    XLayout layout, const GrainSpec& grain, SpawnStrategy strategy);

// Compulsory-traffic lower bound: one load of A (8-byte indices and values
// plus the striped length array), one logical copy of x, one store of y.
std::uint64_t spmv_min_bytes(std::uint64_t nrows, std::uint64_t ncols, std::uint64_t nnz);
double spmv_bandwidth(std::uint64_t nrows, std::uint64_t ncols, std::uint64_t nnz,
                      double seconds);
double spmv_bandwidth(const SparseMatrix& a, double seconds);

}  // namespace migrasim::spmv

#endif
