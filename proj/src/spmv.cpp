#include "migrasim/spmv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace migrasim::spmv {

SparseMatrix SparseMatrix::identity(std::uint64_t n) {
  SparseMatrix a;
  a.nrows = a.ncols = n;
  a.rows.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) a.rows[i].push_back({i, 1.0});
  return a;
}

SparseMatrix gen_laplacian(const LaplacianSpec& spec) {
  if (spec.d != 2 || spec.k != 5)
    throw ConfigError("laplacian generator supports only d=2, k=5 stencils");
  if (spec.n < 1) throw ConfigError("laplacian grid side must be >= 1");
  std::uint64_t n = spec.n;
  SparseMatrix a;
  a.nrows = a.ncols = n * n;
  a.rows.resize(a.nrows);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < n; ++j) {
      std::uint64_t r = i * n + j;
      auto& row = a.rows[r];
      if (i > 0) row.push_back({r - n, -1.0});
      if (j > 0) row.push_back({r - 1, -1.0});
      row.push_back({r, 4.0});
      if (j + 1 < n) row.push_back({r + 1, -1.0});
      if (i + 1 < n) row.push_back({r + n, -1.0});
    }
  }
  return a;
}

// ---------------------------------------------------------------------------
// Matrix Market

namespace {

[[noreturn]] void mm_fail(const std::string& origin, int line, const std::string& what) {
  throw ParseError(origin + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

SparseMatrix parse_matrix_market(std::istream& in, const std::string& origin) {
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) mm_fail(origin, 1, "empty file");
  ++lineno;

  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") mm_fail(origin, lineno, "missing %%MatrixMarket banner");
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix") mm_fail(origin, lineno, "only 'matrix' objects are supported");
  if (format != "coordinate")
    mm_fail(origin, lineno, "only 'coordinate' format is supported (dense 'array' is not)");
  bool pattern = field == "pattern";
  if (field != "real" && field != "integer" && field != "pattern")
    mm_fail(origin, lineno, "unsupported field type '" + field + "'");
  bool symmetric = symmetry == "symmetric";
  if (symmetry != "general" && symmetry != "symmetric")
    mm_fail(origin, lineno, "unsupported symmetry '" + symmetry + "'");

  // Size line: first non-comment line.
  std::uint64_t nrows = 0, ncols = 0, nentries = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    if (!(ss >> nrows >> ncols >> nentries)) mm_fail(origin, lineno, "bad size line");
    break;
  }
  if (nrows == 0 && ncols == 0 && nentries == 0 && in.eof())
    mm_fail(origin, lineno, "missing size line");

  std::vector<std::map<std::uint64_t, double>> acc(nrows);
  std::uint64_t seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    std::uint64_t r = 0, c = 0;
    double v = 1.0;
    if (!(ss >> r >> c)) mm_fail(origin, lineno, "bad entry line");
    if (!pattern && !(ss >> v)) mm_fail(origin, lineno, "entry missing value");
    if (r < 1 || r > nrows || c < 1 || c > ncols)
      mm_fail(origin, lineno, "index out of bounds");
    --r;
    --c;
    acc[r][c] += v;
    if (symmetric && r != c) acc[c][r] += v;
    ++seen;
  }
  if (seen != nentries)
    throw ParseError(origin + ": expected " + std::to_string(nentries) + " entries, found " +
                     std::to_string(seen));

  SparseMatrix a;
  a.nrows = nrows;
  a.ncols = ncols;
  a.rows.resize(nrows);
  for (std::uint64_t r = 0; r < nrows; ++r)
    for (const auto& [c, v] : acc[r]) a.rows[r].push_back({c, v});
  return a;
}

SparseMatrix load_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open matrix file: " + path);
  return parse_matrix_market(in, path);
}

// ---------------------------------------------------------------------------
// Partitioning

XLayout x_layout_from_string(const std::string& s) {
  if (s == "replicated" || s == "1") return XLayout::replicated;
  if (s == "striped" || s == "0") return XLayout::striped;
  throw ParseError("unknown x layout: " + s);
}

const char* to_string(XLayout l) { return l == XLayout::replicated ? "replicated" : "striped"; }

std::uint64_t GrainSpec::grain_for(std::uint64_t nrows) const {
  if (mode == Mode::fixed) return value;
  std::uint64_t g = (nrows + value - 1) / value;
  return g ? g : 1;
}

std::string GrainSpec::to_string() const {
  return mode == Mode::fixed ? "fixed-" + std::to_string(value)
                             : "dynamic-" + std::to_string(value);
}

std::vector<RowRange> partition_rows(std::uint64_t nrows, const GrainSpec& grain,
                                     std::uint32_t p) {
  std::vector<RowRange> out;
  if (nrows == 0) return out;
  std::uint64_t g = grain.grain_for(nrows);
  if (g < 1) throw ConfigError("grain must be >= 1");
  for (std::uint64_t lo = 0; lo < nrows; lo += g) {
    std::uint64_t hi = std::min(nrows, lo + g);
    out.push_back({static_cast<std::uint32_t>(lo % p), lo, hi});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distributed CSR install

DistCsr DistCsr::build(Machine& m, const SparseMatrix& a) {
  DistCsr d;
  d.nrows = a.nrows;
  d.ncols = a.ncols;
  d.nnz = a.nnz();
  d.row_lengths = StripedArray::allocate(m, a.nrows, "csr.row_lengths");
  std::vector<std::uint64_t> lens(a.nrows);
  for (std::uint64_t r = 0; r < a.nrows; ++r) lens[r] = a.rows[r].size();
  d.cols = JaggedLocalArray::allocate(m, lens, "csr.cols");
  d.vals = JaggedLocalArray::allocate(m, lens, "csr.vals");
  for (std::uint64_t r = 0; r < a.nrows; ++r) {
    m.poke(d.row_lengths.addr(r), static_cast<word_t>(lens[r]));
    for (std::uint64_t j = 0; j < lens[r]; ++j) {
      m.poke(d.cols.addr(r, j), static_cast<word_t>(a.rows[r][j].first));
      m.poke(d.vals.addr(r, j), word_from_double(a.rows[r][j].second));
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Kernel

namespace {

struct SpmvShared {
  DistCsr a;
  XLayout layout = XLayout::replicated;
  ReplicatedArray x_rep;
  StripedArray x_str;
  StripedArray y;
  std::uint64_t compute_migrations = 0;
  std::uint64_t advance_migrations = 0;
};

SimTask<void> spmv_worker(Ctx& ctx, SpmvShared* sh, std::uint64_t begin, std::uint64_t end) {
  for (std::uint64_t r = begin; r < end; ++r) {
    std::uint64_t before = ctx.stats().migrations;
    // Row advance: the length lives on the row's stripe slot, so this read
    // carries the hop to the row's nodelet.
    word_t len = co_await ctx.read(sh->a.row_lengths.addr(r));
    std::uint64_t after_advance = ctx.stats().migrations;
    double acc = 0.0;
    for (word_t j = 0; j < len; ++j) {
      auto jj = static_cast<std::uint64_t>(j);
      word_t col = co_await ctx.read(sh->a.cols.addr(r, jj));
      word_t val = co_await ctx.read(sh->a.vals.addr(r, jj));
      auto c = static_cast<std::uint64_t>(col);
      word_t xw = sh->layout == XLayout::replicated
                      ? co_await ctx.read(sh->x_rep.addr_local(ctx, c))
                      : co_await ctx.read(sh->x_str.addr(c));
      acc += double_from_word(val) * double_from_word(xw);
    }
    co_await ctx.remote_write(sh->y.addr(r), word_from_double(acc));
    std::uint64_t done = ctx.stats().migrations;
    sh->advance_migrations += after_advance - before;
    sh->compute_migrations += done - after_advance;
  }
}

SimTask<void> spmv_root(Ctx& ctx, std::shared_ptr<std::vector<PlacedTask>> tasks,
                        SpawnStrategy strategy) {
  co_await spawn_tasks(ctx, tasks, strategy);
  co_await ctx.sync_children();
}

}  // namespace

SpmvResult spmv_run(Machine& m, const SparseMatrix& a, const std::vector<double>& x,
                    XLayout layout, const GrainSpec& grain, SpawnStrategy strategy) {
  if (x.size() != a.ncols) throw ConfigError("spmv: x length does not match matrix columns");
  for (std::uint64_t r = 0; r < a.nrows; ++r)
    for (std::size_t j = 1; j < a.rows[r].size(); ++j)
      if (a.rows[r][j - 1].first >= a.rows[r][j].first)
        throw ConfigError("spmv: row " + std::to_string(r) + " columns not strictly increasing");

  auto sh = std::make_shared<SpmvShared>();
  sh->a = DistCsr::build(m, a);
  sh->layout = layout;
  sh->y = StripedArray::allocate(m, a.nrows, "spmv.y");
  if (layout == XLayout::replicated) {
    sh->x_rep = ReplicatedArray::allocate(m, a.ncols, "spmv.x");
    for (std::uint64_t i = 0; i < a.ncols; ++i) sh->x_rep.poke_all(m, i, word_from_double(x[i]));
  } else {
    sh->x_str = StripedArray::allocate(m, a.ncols, "spmv.x");
    for (std::uint64_t i = 0; i < a.ncols; ++i) m.poke(sh->x_str.addr(i), word_from_double(x[i]));
  }

  auto ranges = partition_rows(a.nrows, grain, m.total_nodelets());
  auto tasks = std::make_shared<std::vector<PlacedTask>>();
  for (const auto& rr : ranges)
    tasks->push_back({rr.nodelet, [sh, rr](Ctx& ctx) { return spmv_worker(ctx, sh.get(), rr.begin, rr.end); }});

  EventCounters before = m.counters();
  m.spawn_at(0, [tasks, strategy](Ctx& ctx) { return spmv_root(ctx, tasks, strategy); });
  RunResult run = m.run_until_idle();

  SpmvResult res;
  res.y.resize(a.nrows);
  for (std::uint64_t r = 0; r < a.nrows; ++r) res.y[r] = double_from_word(m.peek(sh->y.addr(r)));
  res.counters = run.counters - before;
  res.time.makespan_cycles = res.counters.max_busy_cycles();
  res.time.seconds = static_cast<double>(res.time.makespan_cycles) / m.config().clock_hz;
  res.threads = ranges.size();
  res.compute_migrations = sh->compute_migrations;
  res.advance_migrations = sh->advance_migrations;
  return res;
}

// ---------------------------------------------------------------------------
// Bandwidth

std::uint64_t spmv_min_bytes(std::uint64_t nrows, std::uint64_t ncols, std::uint64_t nnz) {
  return nnz * (8 + 8) + (nrows + 1) * 8 + 8 * ncols + 8 * nrows;
}

double spmv_bandwidth(std::uint64_t nrows, std::uint64_t ncols, std::uint64_t nnz,
                      double seconds) {
  if (!(seconds > 0.0)) throw ConfigError("spmv_bandwidth: time must be positive");
  return static_cast<double>(spmv_min_bytes(nrows, ncols, nnz)) / seconds;
}

double spmv_bandwidth(const SparseMatrix& a, double seconds) {
  return spmv_bandwidth(a.nrows, a.ncols, a.nnz(), seconds);
}

}  // namespace migrasim::spmv
