#ifndef MIGRASIM_MACHINE_HPP
#define MIGRASIM_MACHINE_HPP

#include <bit>
#include <coroutine>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "migrasim/rng.hpp"
#include "migrasim/task.hpp"

namespace migrasim {

// One machine word. Everything in simulated memory is 8 bytes; doubles are
// stored as bit patterns.
using word_t = std::int64_t;

inline word_t word_from_double(double d) { return std::bit_cast<word_t>(d); }
inline double double_from_word(word_t w) { return std::bit_cast<double>(w); }

using ThreadletId = std::uint32_t;
inline constexpr ThreadletId kNoThreadlet = static_cast<ThreadletId>(-1);

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct AllocationError : Error {
  using Error::Error;
};
struct FaultError : Error {
  using Error::Error;
};
struct LifecycleError : Error {
  using Error::Error;
};
struct DeadlockError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ConstructionError : Error {
  using Error::Error;
};

// Cycle costs for each modeled event. Defaults keep puts cheap, migrations
// expensive, and inter-node migrations the most expensive.
struct CostTable {
  std::uint32_t local_read = 1;
  std::uint32_t local_write = 1;
  std::uint32_t atomic_op = 2;
  std::uint32_t remote_write_packet = 3;
  std::uint32_t migration_intra_node = 12;
  std::uint32_t migration_inter_node = 48;
  std::uint32_t spawn = 6;
  std::uint32_t stack_return_migration = 12;
};

struct MachineConfig {
  std::uint32_t nodes = 1;
  std::uint32_t nodelets_per_node = 8;
  std::uint32_t max_threadlets_per_nodelet = 64;
  double clock_hz = 175e6;
  std::uint64_t nodelet_memory_bytes = 1ull << 30;
  std::uint64_t seed = 0;
  CostTable costs;

  std::uint32_t total_nodelets() const { return nodes * nodelets_per_node; }
  void validate() const;
};

// Parse a flat key = value config file ('#' comments). Unknown keys and
// malformed values are reported with their line number.
MachineConfig parse_machine_config(const std::string& text);
MachineConfig load_machine_config(const std::string& path);

struct GlobalAddress {
  std::uint32_t nodelet = 0;
  std::uint64_t word = 0;  // word offset within the nodelet's memory

  bool operator==(const GlobalAddress&) const = default;
  GlobalAddress plus(std::uint64_t words) const { return {nodelet, word + words}; }
};

struct CasResult {
  bool success = false;
  word_t observed = 0;
};

// Per-nodelet event tallies. All vectors are sized P.
struct EventCounters {
  std::vector<std::uint64_t> local_reads;
  std::vector<std::uint64_t> local_writes;
  std::vector<std::uint64_t> atomics;
  std::vector<std::uint64_t> remote_writes_issued;
  std::vector<std::uint64_t> remote_writes_received;
  std::vector<std::uint64_t> migrations_in;
  std::vector<std::uint64_t> migrations_out;
  std::vector<std::uint64_t> inter_node_migrations;
  std::vector<std::uint64_t> spawns;
  std::vector<std::uint64_t> stack_return_migrations;
  std::vector<std::uint64_t> busy_cycles;

  EventCounters() = default;
  explicit EventCounters(std::uint32_t p);

  static std::uint64_t sum(const std::vector<std::uint64_t>& v);
  std::uint64_t total_migrations() const { return sum(migrations_out); }
  std::uint64_t max_busy_cycles() const;

  EventCounters operator-(const EventCounters& rhs) const;
  std::string to_json() const;  // stable key and index ordering
};

// Migration totals broken down by the operation that triggered them.
struct MigrationCauses {
  std::uint64_t read = 0;
  std::uint64_t write = 0;
  std::uint64_t cas = 0;
  std::uint64_t stack = 0;
};

// Event tallies a single threadlet has caused, wherever they were charged.
struct ThreadletStats {
  std::uint64_t local_reads = 0;
  std::uint64_t local_writes = 0;
  std::uint64_t remote_writes_issued = 0;
  std::uint64_t atomics = 0;
  std::uint64_t migrations = 0;
  std::uint64_t inter_node_migrations = 0;
  std::uint64_t stack_returns = 0;
  std::uint64_t cycles = 0;

  std::uint64_t reads_and_writes() const { return local_reads + local_writes; }
};

struct SimTime {
  std::uint64_t makespan_cycles = 0;
  double seconds = 0.0;
};

struct RunResult {
  SimTime time;
  EventCounters counters;
};

enum class ThreadletState : std::uint8_t {
  runnable,
  blocked_on_spawn_credit,  // waiting in a nodelet's FIFO for a slot
  blocked_on_sync,          // waiting for spawned children to finish
  finished,
};

class Machine;
class Ctx;

using TaskFn = std::function<SimTask<void>(Ctx&)>;

namespace detail {

struct OpRead {
  GlobalAddress addr;
};
struct OpWrite {
  GlobalAddress addr;
  word_t value;
};
struct OpRemoteWrite {
  GlobalAddress addr;
  word_t value;
};
struct OpCas {
  GlobalAddress addr;
  word_t expect;
  word_t desired;
};
struct OpStackAccess {};
struct OpSpawn {
  std::uint32_t nodelet;
  TaskFn fn;
};
struct OpSync {};

using PendingOp = std::variant<std::monostate, OpRead, OpWrite, OpRemoteWrite, OpCas,
                               OpStackAccess, OpSpawn, OpSync>;
using OpResult = std::variant<std::monostate, word_t, CasResult, ThreadletId>;

}  // namespace detail

// Per-threadlet facade through which simulated code performs machine
// operations. Each awaited operation is one scheduler step.
class Ctx {
 public:
  ThreadletId id() const;
  std::uint32_t current_nodelet() const;
  std::uint32_t home_nodelet() const;
  ThreadletStats stats() const;

  struct Awaiter {
    Ctx* ctx;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) noexcept;
  };
  struct WordAwaiter : Awaiter {
    word_t await_resume() const;
  };
  struct VoidAwaiter : Awaiter {
    void await_resume() const noexcept {}
  };
  struct CasAwaiter : Awaiter {
    CasResult await_resume() const;
  };
  struct SpawnAwaiter : Awaiter {
    ThreadletId await_resume() const;
  };

  // Remote addresses migrate the threadlet to the owning nodelet.
  WordAwaiter read(GlobalAddress a);
  VoidAwaiter write(GlobalAddress a, word_t v);
  // Fire-and-forget put: never migrates, applied at the next sync point.
  VoidAwaiter remote_write(GlobalAddress a, word_t v);
  // Get-style atomic: migrates like a read, then compares and swaps.
  CasAwaiter cas(GlobalAddress a, word_t expect, word_t desired);
  // Models the stack ping-pong: returns the threadlet to its home nodelet.
  VoidAwaiter stack_access();
  // The task function must be a named TaskFn moved in (built in its own
  // statement, not inside the co_await expression): gcc 11 miscompiles
  // non-trivial temporaries materialized inside co_await full-expressions
  // (bitwise frame copies), so the signature forbids them.
  SpawnAwaiter spawn(std::uint32_t nodelet, TaskFn&& fn);
  // Waits until all direct children have finished, then drains all pending
  // remote writes (global synchronization point).
  VoidAwaiter sync_children();

 private:
  friend class Machine;
  Machine* machine_ = nullptr;
  ThreadletId tid_ = kNoThreadlet;
};

class Machine {
 public:
  explicit Machine(const MachineConfig& config);
  ~Machine();
  Machine(const Machine&) = delete;
  Machine& operator=(const Machine&) = delete;

  const MachineConfig& config() const { return config_; }
  std::uint32_t total_nodelets() const { return p_; }
  std::uint32_t node_of(std::uint32_t nodelet) const { return nodelet / config_.nodelets_per_node; }
  Rng& rng() { return rng_; }

  // Host-side allocation and direct memory access. These are setup and
  // inspection tools; they charge nothing.
  GlobalAddress alloc(std::uint32_t nodelet, std::uint64_t nwords, std::string name);
  word_t peek(GlobalAddress a) const;
  void poke(GlobalAddress a, word_t v);

  // Spawn a root threadlet from the host (home = spawn nodelet). Spawning
  // from simulated code goes through Ctx::spawn.
  ThreadletId spawn_at(std::uint32_t nodelet, TaskFn fn,
                       const std::vector<word_t>& initial_regs = {});

  // Deterministic cooperative scheduler: rounds over runnable threadlets in
  // id order, one operation per threadlet per round, until all finish and
  // the remote-write queues drain. Kernel drivers call this once per program
  // phase; run_to_completion additionally seals the machine (any later spawn
  // is a lifecycle error).
  RunResult run_until_idle();
  RunResult run_to_completion();

  const EventCounters& counters() const { return counters_; }
  const MigrationCauses& migration_causes() const { return causes_; }
  SimTime time() const;
  ThreadletStats stats_of(ThreadletId id) const;
  ThreadletState state_of(ThreadletId id) const;
  std::uint32_t current_nodelet_of(ThreadletId id) const;

  std::uint64_t peak_runnable(std::uint32_t nodelet) const { return peak_occupancy_[nodelet]; }
  std::uint64_t peak_runnable_any_nodelet() const;
  std::uint64_t live_threadlets() const { return live_; }

  std::string report_json() const;  // config + time + counters, stable order

 private:
  friend class Ctx;

  struct Threadlet {
    ThreadletId id = kNoThreadlet;
    std::uint32_t home = 0;
    std::uint32_t current = 0;
    std::uint32_t slot_nodelet = 0;  // nodelet whose credit slot it holds
    ThreadletState state = ThreadletState::runnable;
    ThreadletId parent = kNoThreadlet;
    std::uint32_t outstanding_children = 0;
    std::uint64_t steps = 0;  // program counter: completed task steps
    std::vector<word_t> regs;
    ThreadletStats stats;

    TaskFn fn;  // keeps lambda captures alive for the coroutine's lifetime
    SimTask<void> body;
    std::coroutine_handle<> resume_point;
    detail::PendingOp pending;
    detail::OpResult result;
    Ctx ctx;
  };

  struct Packet {
    GlobalAddress addr;
    word_t value;
  };

  Threadlet& threadlet(ThreadletId id) const;
  ThreadletId spawn_common(std::uint32_t at, TaskFn fn, const std::vector<word_t>& regs,
                           Threadlet* spawner);
  void admit(Threadlet& t);
  void admit_from_queue(std::uint32_t nodelet);
  void release_slot(Threadlet& t);
  void step(Threadlet& t);
  bool exec_pending(Threadlet& t);  // false: parked on sync, do not resume
  void finish(Threadlet& t);
  void wake_parent(ThreadletId parent);
  void drain_remote_writes();
  void validate_address(const GlobalAddress& a) const;
  void migrate(Threadlet& t, std::uint32_t dest, std::uint64_t* cause_counter);
  void charge(Threadlet& t, std::uint32_t nodelet, std::uint64_t cycles);

  MachineConfig config_;
  std::uint32_t p_ = 0;
  Rng rng_;
  std::vector<std::vector<word_t>> memory_;
  std::vector<std::uint64_t> alloc_top_;

  struct AllocRecord {
    std::string name;
    std::uint64_t base = 0;
    std::uint64_t words = 0;
  };
  std::vector<std::vector<AllocRecord>> alloc_map_;

  std::vector<std::unique_ptr<Threadlet>> threadlets_;
  std::vector<std::deque<ThreadletId>> credit_queue_;
  std::vector<std::uint32_t> occupancy_;
  std::vector<std::uint64_t> peak_occupancy_;
  std::vector<std::deque<Packet>> pending_writes_;  // FIFO per destination

  EventCounters counters_;
  MigrationCauses causes_;
  std::uint64_t live_ = 0;
  bool run_finished_ = false;
};

// Spawn strategy used by kernels to launch a list of tasks: `serial` issues
// one spawn per task from the calling context; `recursive` builds a binary
// tree of spawner threadlets over the task list.
enum class SpawnStrategy { serial, recursive };

SpawnStrategy spawn_strategy_from_string(const std::string& s);
const char* to_string(SpawnStrategy s);

struct PlacedTask {
  std::uint32_t nodelet = 0;
  TaskFn fn;
};

// Launch tasks[lo, hi) from inside a threadlet per the strategy. The caller
// is responsible for a later sync_children(); recursive spawners sync their
// own subtree before finishing.
SimTask<void> spawn_tasks(Ctx& ctx, std::shared_ptr<std::vector<PlacedTask>> tasks,
                          SpawnStrategy strategy);

}  // namespace migrasim

#endif
