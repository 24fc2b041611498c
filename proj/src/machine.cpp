#include "migrasim/machine.hpp"

#include <algorithm>
#include <cassert>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace migrasim {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config

void MachineConfig::validate() const {
  if (nodes < 1) throw ConfigError("machine config: nodes must be >= 1");
  if (nodelets_per_node < 1) throw ConfigError("machine config: nodelets_per_node must be >= 1");
  if (max_threadlets_per_nodelet < 1)
    throw ConfigError("machine config: max_threadlets_per_nodelet must be >= 1");
  if (!(clock_hz > 0.0)) throw ConfigError("machine config: clock_hz must be positive");
  if (nodelet_memory_bytes < 8) throw ConfigError("machine config: nodelet memory too small");
  const std::uint32_t all[] = {costs.local_read,          costs.local_write,
                               costs.atomic_op,           costs.remote_write_packet,
                               costs.migration_intra_node, costs.migration_inter_node,
                               costs.spawn,               costs.stack_return_migration};
  for (auto c : all)
    if (c < 1) throw ConfigError("machine config: all cost table entries must be >= 1");
  if (costs.migration_inter_node < costs.migration_intra_node)
    throw ConfigError("machine config: migration_inter_node must be >= migration_intra_node");
  if (costs.migration_intra_node < costs.remote_write_packet)
    throw ConfigError("machine config: migration_intra_node must be >= remote_write_packet");
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

MachineConfig parse_machine_config(const std::string& text) {
  MachineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "nodes")
        cfg.nodes = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "nodelets_per_node")
        cfg.nodelets_per_node = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "max_threadlets_per_nodelet")
        cfg.max_threadlets_per_nodelet = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "clock_hz")
        cfg.clock_hz = std::stod(value);
      else if (key == "nodelet_memory_bytes")
        cfg.nodelet_memory_bytes = std::stoull(value);
      else if (key == "seed")
        cfg.seed = std::stoull(value);
      else if (key == "cost.local_read")
        cfg.costs.local_read = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "cost.local_write")
        cfg.costs.local_write = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "cost.atomic_op")
        cfg.costs.atomic_op = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "cost.remote_write_packet")
        cfg.costs.remote_write_packet = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "cost.migration_intra_node")
        cfg.costs.migration_intra_node = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "cost.migration_inter_node")
        cfg.costs.migration_inter_node = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "cost.spawn")
        cfg.costs.spawn = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "cost.stack_return_migration")
        cfg.costs.stack_return_migration = static_cast<std::uint32_t>(std::stoul(value));
      else
        throw ParseError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("config line " + std::to_string(lineno) + ": bad value '" + value + "'");
    }
  }
  cfg.validate();
  return cfg;
}

MachineConfig load_machine_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_machine_config(ss.str());
}

// ---------------------------------------------------------------------------
// Counters

EventCounters::EventCounters(std::uint32_t p)
    : local_reads(p, 0),
      local_writes(p, 0),
      atomics(p, 0),
      remote_writes_issued(p, 0),
      remote_writes_received(p, 0),
      migrations_in(p, 0),
      migrations_out(p, 0),
      inter_node_migrations(p, 0),
      spawns(p, 0),
      stack_return_migrations(p, 0),
      busy_cycles(p, 0) {}

std::uint64_t EventCounters::sum(const std::vector<std::uint64_t>& v) {
  std::uint64_t s = 0;
  for (auto x : v) s += x;
  return s;
}

std::uint64_t EventCounters::max_busy_cycles() const {
  std::uint64_t m = 0;
  for (auto x : busy_cycles) m = std::max(m, x);
  return m;
}

EventCounters EventCounters::operator-(const EventCounters& rhs) const {
  auto sub = [](const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
    std::vector<std::uint64_t> out(a.size(), 0);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
  };
  EventCounters d;
  d.local_reads = sub(local_reads, rhs.local_reads);
  d.local_writes = sub(local_writes, rhs.local_writes);
  d.atomics = sub(atomics, rhs.atomics);
  d.remote_writes_issued = sub(remote_writes_issued, rhs.remote_writes_issued);
  d.remote_writes_received = sub(remote_writes_received, rhs.remote_writes_received);
  d.migrations_in = sub(migrations_in, rhs.migrations_in);
  d.migrations_out = sub(migrations_out, rhs.migrations_out);
  d.inter_node_migrations = sub(inter_node_migrations, rhs.inter_node_migrations);
  d.spawns = sub(spawns, rhs.spawns);
  d.stack_return_migrations = sub(stack_return_migrations, rhs.stack_return_migrations);
  d.busy_cycles = sub(busy_cycles, rhs.busy_cycles);
  return d;
}

namespace {

ordered_json counters_to_ordered_json(const EventCounters& c) {
  ordered_json j;
  j["local_reads"] = c.local_reads;
  j["local_writes"] = c.local_writes;
  j["atomics"] = c.atomics;
  j["remote_writes_issued"] = c.remote_writes_issued;
  j["remote_writes_received"] = c.remote_writes_received;
  j["migrations_in"] = c.migrations_in;
  j["migrations_out"] = c.migrations_out;
  j["inter_node_migrations"] = c.inter_node_migrations;
  j["spawns"] = c.spawns;
  j["stack_return_migrations"] = c.stack_return_migrations;
  j["busy_cycles"] = c.busy_cycles;
  ordered_json totals;
  totals["local_reads"] = EventCounters::sum(c.local_reads);
  totals["local_writes"] = EventCounters::sum(c.local_writes);
  totals["atomics"] = EventCounters::sum(c.atomics);
  totals["remote_writes_issued"] = EventCounters::sum(c.remote_writes_issued);
  totals["remote_writes_received"] = EventCounters::sum(c.remote_writes_received);
  totals["migrations"] = EventCounters::sum(c.migrations_out);
  totals["inter_node_migrations"] = EventCounters::sum(c.inter_node_migrations);
  totals["spawns"] = EventCounters::sum(c.spawns);
  totals["stack_return_migrations"] = EventCounters::sum(c.stack_return_migrations);
  totals["busy_cycles_max"] = c.max_busy_cycles();
  j["totals"] = totals;
  return j;
}

ordered_json config_to_ordered_json(const MachineConfig& cfg) {
  ordered_json j;
  j["nodes"] = cfg.nodes;
  j["nodelets_per_node"] = cfg.nodelets_per_node;
  j["max_threadlets_per_nodelet"] = cfg.max_threadlets_per_nodelet;
  j["clock_hz"] = cfg.clock_hz;
  j["nodelet_memory_bytes"] = cfg.nodelet_memory_bytes;
  j["seed"] = cfg.seed;
  ordered_json costs;
  costs["local_read"] = cfg.costs.local_read;
  costs["local_write"] = cfg.costs.local_write;
  costs["atomic_op"] = cfg.costs.atomic_op;
  costs["remote_write_packet"] = cfg.costs.remote_write_packet;
  costs["migration_intra_node"] = cfg.costs.migration_intra_node;
  costs["migration_inter_node"] = cfg.costs.migration_inter_node;
  costs["spawn"] = cfg.costs.spawn;
  costs["stack_return_migration"] = cfg.costs.stack_return_migration;
  j["costs"] = costs;
  return j;
}

}  // namespace

std::string EventCounters::to_json() const { return counters_to_ordered_json(*this).dump(); }

// ---------------------------------------------------------------------------
// Ctx

ThreadletId Ctx::id() const { return tid_; }

std::uint32_t Ctx::current_nodelet() const {
  return machine_->current_nodelet_of(tid_);
}

std::uint32_t Ctx::home_nodelet() const { return machine_->threadlet(tid_).home; }

ThreadletStats Ctx::stats() const { return machine_->stats_of(tid_); }

void Ctx::Awaiter::await_suspend(std::coroutine_handle<> h) noexcept {
  ctx->machine_->threadlet(ctx->tid_).resume_point = h;
}

word_t Ctx::WordAwaiter::await_resume() const {
  return std::get<word_t>(ctx->machine_->threadlet(ctx->tid_).result);
}

CasResult Ctx::CasAwaiter::await_resume() const {
  return std::get<CasResult>(ctx->machine_->threadlet(ctx->tid_).result);
}

ThreadletId Ctx::SpawnAwaiter::await_resume() const {
  return std::get<ThreadletId>(ctx->machine_->threadlet(ctx->tid_).result);
}

Ctx::WordAwaiter Ctx::read(GlobalAddress a) {
  machine_->threadlet(tid_).pending = detail::OpRead{a};
  return {{this}};
}

Ctx::VoidAwaiter Ctx::write(GlobalAddress a, word_t v) {
  machine_->threadlet(tid_).pending = detail::OpWrite{a, v};
  return {{this}};
}

Ctx::VoidAwaiter Ctx::remote_write(GlobalAddress a, word_t v) {
  machine_->threadlet(tid_).pending = detail::OpRemoteWrite{a, v};
  return {{this}};
}

Ctx::CasAwaiter Ctx::cas(GlobalAddress a, word_t expect, word_t desired) {
  machine_->threadlet(tid_).pending = detail::OpCas{a, expect, desired};
  return {{this}};
}

Ctx::VoidAwaiter Ctx::stack_access() {
  machine_->threadlet(tid_).pending = detail::OpStackAccess{};
  return {{this}};
}

Ctx::SpawnAwaiter Ctx::spawn(std::uint32_t nodelet, TaskFn&& fn) {
  machine_->threadlet(tid_).pending = detail::OpSpawn{nodelet, std::move(fn)};
  return {{this}};
}

Ctx::VoidAwaiter Ctx::sync_children() {
  machine_->threadlet(tid_).pending = detail::OpSync{};
  return {{this}};
}

// ---------------------------------------------------------------------------
// Machine

Machine::Machine(const MachineConfig& config)
    : config_(config),
      p_(config.total_nodelets()),
      rng_(config.seed),
      memory_(config.total_nodelets()),
      alloc_top_(config.total_nodelets(), 0),
      alloc_map_(config.total_nodelets()),
      credit_queue_(config.total_nodelets()),
      occupancy_(config.total_nodelets(), 0),
      peak_occupancy_(config.total_nodelets(), 0),
      pending_writes_(config.total_nodelets()),
      counters_(config.total_nodelets()) {
  config_.validate();
}

Machine::~Machine() = default;

Machine::Threadlet& Machine::threadlet(ThreadletId id) const {
  return *threadlets_.at(id);
}

GlobalAddress Machine::alloc(std::uint32_t nodelet, std::uint64_t nwords, std::string name) {
  if (nodelet >= p_) throw AllocationError("alloc: nodelet out of range");
  std::uint64_t budget_words = config_.nodelet_memory_bytes / 8;
  if (alloc_top_[nodelet] + nwords > budget_words)
    throw AllocationError("alloc: nodelet " + std::to_string(nodelet) +
                          " memory budget exceeded allocating '" + name + "' (" +
                          std::to_string(nwords) + " words)");
  GlobalAddress base{nodelet, alloc_top_[nodelet]};
  alloc_top_[nodelet] += nwords;
  memory_[nodelet].resize(alloc_top_[nodelet], 0);
  alloc_map_[nodelet].push_back({std::move(name), base.word, nwords});
  return base;
}

void Machine::validate_address(const GlobalAddress& a) const {
  if (a.nodelet < p_ && a.word < alloc_top_[a.nodelet]) return;
  std::ostringstream msg;
  msg << "fault: access to unallocated address (nodelet " << a.nodelet << ", word " << a.word
      << ")";
  if (a.nodelet < p_) {
    msg << "; allocations on nodelet " << a.nodelet << ":";
    for (const auto& rec : alloc_map_[a.nodelet])
      msg << " [" << rec.name << " @" << rec.base << "+" << rec.words << "]";
  } else {
    msg << "; machine has " << p_ << " nodelets";
  }
  throw FaultError(msg.str());
}

word_t Machine::peek(GlobalAddress a) const {
  validate_address(a);
  return memory_[a.nodelet][a.word];
}

void Machine::poke(GlobalAddress a, word_t v) {
  validate_address(a);
  memory_[a.nodelet][a.word] = v;
}

void Machine::charge(Threadlet& t, std::uint32_t nodelet, std::uint64_t cycles) {
  counters_.busy_cycles[nodelet] += cycles;
  t.stats.cycles += cycles;
}

void Machine::migrate(Threadlet& t, std::uint32_t dest, std::uint64_t* cause_counter) {
  std::uint32_t src = t.current;
  bool inter = node_of(src) != node_of(dest);
  charge(t, src, inter ? config_.costs.migration_inter_node : config_.costs.migration_intra_node);
  counters_.migrations_out[src]++;
  counters_.migrations_in[dest]++;
  if (inter) {
    counters_.inter_node_migrations[src]++;
    t.stats.inter_node_migrations++;
  }
  t.stats.migrations++;
  if (cause_counter) (*cause_counter)++;
  t.current = dest;
}

ThreadletId Machine::spawn_at(std::uint32_t nodelet, TaskFn fn,
                              const std::vector<word_t>& initial_regs) {
  return spawn_common(nodelet, std::move(fn), initial_regs, nullptr);
}

ThreadletId Machine::spawn_common(std::uint32_t at, TaskFn fn, const std::vector<word_t>& regs,
                                  Threadlet* spawner) {
  if (run_finished_) throw LifecycleError("spawn after run_to_completion has returned");
  if (at >= p_) throw ConfigError("spawn: nodelet out of range");
  if (regs.size() > 16)
    throw ConstructionError("threadlet register file limited to 16 words, got " +
                            std::to_string(regs.size()));
  auto t = std::make_unique<Threadlet>();
  t->id = static_cast<ThreadletId>(threadlets_.size());
  t->home = spawner ? spawner->current : at;
  t->current = at;
  t->slot_nodelet = at;
  t->parent = spawner ? spawner->id : kNoThreadlet;
  t->regs = regs;
  t->fn = std::move(fn);
  t->ctx.machine_ = this;
  t->ctx.tid_ = t->id;
  t->body = t->fn(t->ctx);
  t->resume_point = t->body.handle();

  if (spawner) {
    charge(*spawner, spawner->current, config_.costs.spawn);
    spawner->outstanding_children++;
  } else {
    counters_.busy_cycles[at] += config_.costs.spawn;
  }
  counters_.spawns[at]++;
  live_++;

  ThreadletId id = t->id;
  admit(*t);
  threadlets_.push_back(std::move(t));
  return id;
}

void Machine::admit(Threadlet& t) {
  if (occupancy_[t.slot_nodelet] < config_.max_threadlets_per_nodelet) {
    t.state = ThreadletState::runnable;
    occupancy_[t.slot_nodelet]++;
    peak_occupancy_[t.slot_nodelet] =
        std::max<std::uint64_t>(peak_occupancy_[t.slot_nodelet], occupancy_[t.slot_nodelet]);
  } else {
    t.state = ThreadletState::blocked_on_spawn_credit;
    credit_queue_[t.slot_nodelet].push_back(t.id);
  }
}

void Machine::admit_from_queue(std::uint32_t nodelet) {
  while (occupancy_[nodelet] < config_.max_threadlets_per_nodelet &&
         !credit_queue_[nodelet].empty()) {
    ThreadletId id = credit_queue_[nodelet].front();
    credit_queue_[nodelet].pop_front();
    Threadlet& t = threadlet(id);
    t.state = ThreadletState::runnable;
    occupancy_[nodelet]++;
    peak_occupancy_[nodelet] = std::max<std::uint64_t>(peak_occupancy_[nodelet], occupancy_[nodelet]);
  }
}

void Machine::release_slot(Threadlet& t) {
  assert(occupancy_[t.slot_nodelet] > 0);
  occupancy_[t.slot_nodelet]--;
  admit_from_queue(t.slot_nodelet);
}

void Machine::wake_parent(ThreadletId parent) {
  Threadlet& t = threadlet(parent);
  if (occupancy_[t.slot_nodelet] < config_.max_threadlets_per_nodelet) {
    t.state = ThreadletState::runnable;
    occupancy_[t.slot_nodelet]++;
    peak_occupancy_[t.slot_nodelet] =
        std::max<std::uint64_t>(peak_occupancy_[t.slot_nodelet], occupancy_[t.slot_nodelet]);
  } else {
    t.state = ThreadletState::blocked_on_spawn_credit;
    credit_queue_[t.slot_nodelet].push_back(t.id);
  }
}

void Machine::finish(Threadlet& t) {
  t.state = ThreadletState::finished;
  live_--;
  release_slot(t);
  if (t.parent != kNoThreadlet) {
    Threadlet& p = threadlet(t.parent);
    assert(p.outstanding_children > 0);
    p.outstanding_children--;
    if (p.outstanding_children == 0 && p.state == ThreadletState::blocked_on_sync) wake_parent(p.id);
  }
}

bool Machine::exec_pending(Threadlet& t) {
  using namespace detail;
  if (std::holds_alternative<std::monostate>(t.pending)) return true;  // first slice

  if (std::holds_alternative<OpSync>(t.pending)) {
    if (t.outstanding_children > 0) {
      t.state = ThreadletState::blocked_on_sync;
      release_slot(t);
      return false;
    }
    drain_remote_writes();
    t.result = std::monostate{};
    t.pending = std::monostate{};
    return true;
  }

  if (auto* op = std::get_if<OpRead>(&t.pending)) {
    validate_address(op->addr);
    if (op->addr.nodelet != t.current) migrate(t, op->addr.nodelet, &causes_.read);
    charge(t, op->addr.nodelet, config_.costs.local_read);
    counters_.local_reads[op->addr.nodelet]++;
    t.stats.local_reads++;
    t.result = memory_[op->addr.nodelet][op->addr.word];
  } else if (auto* op = std::get_if<OpWrite>(&t.pending)) {
    validate_address(op->addr);
    if (op->addr.nodelet != t.current) migrate(t, op->addr.nodelet, &causes_.write);
    charge(t, op->addr.nodelet, config_.costs.local_write);
    counters_.local_writes[op->addr.nodelet]++;
    t.stats.local_writes++;
    memory_[op->addr.nodelet][op->addr.word] = op->value;
    t.result = std::monostate{};
  } else if (auto* op = std::get_if<OpRemoteWrite>(&t.pending)) {
    validate_address(op->addr);
    charge(t, t.current, config_.costs.remote_write_packet);
    counters_.remote_writes_issued[t.current]++;
    t.stats.remote_writes_issued++;
    pending_writes_[op->addr.nodelet].push_back({op->addr, op->value});
    t.result = std::monostate{};
  } else if (auto* op = std::get_if<OpCas>(&t.pending)) {
    validate_address(op->addr);
    if (op->addr.nodelet != t.current) migrate(t, op->addr.nodelet, &causes_.cas);
    charge(t, op->addr.nodelet, config_.costs.atomic_op);
    counters_.atomics[op->addr.nodelet]++;
    t.stats.atomics++;
    word_t& cell = memory_[op->addr.nodelet][op->addr.word];
    CasResult r{false, cell};
    if (cell == op->expect) {
      cell = op->desired;
      r.success = true;
    }
    t.result = r;
  } else if (std::holds_alternative<OpStackAccess>(t.pending)) {
    if (t.current != t.home) {
      std::uint32_t src = t.current;
      bool inter = node_of(src) != node_of(t.home);
      charge(t, src, config_.costs.stack_return_migration);
      counters_.stack_return_migrations[src]++;
      counters_.migrations_out[src]++;
      counters_.migrations_in[t.home]++;
      if (inter) {
        counters_.inter_node_migrations[src]++;
        t.stats.inter_node_migrations++;
      }
      causes_.stack++;
      t.stats.migrations++;
      t.stats.stack_returns++;
      t.current = t.home;
    }
    charge(t, t.current, config_.costs.local_read);
    counters_.local_reads[t.current]++;
    t.stats.local_reads++;
    t.result = std::monostate{};
  } else if (auto* op = std::get_if<OpSpawn>(&t.pending)) {
    ThreadletId child = spawn_common(op->nodelet, std::move(op->fn), {}, &t);
    t.result = child;
  }

  t.pending = std::monostate{};
  return true;
}

void Machine::step(Threadlet& t) {
  if (!exec_pending(t)) return;  // parked waiting on children
  t.steps++;
  t.resume_point.resume();
  if (t.body.done()) {
    t.body.handle().promise().take_result();  // propagate kernel exceptions
    finish(t);
  }
}

void Machine::drain_remote_writes() {
  for (std::uint32_t dest = 0; dest < p_; ++dest) {
    auto& q = pending_writes_[dest];
    while (!q.empty()) {
      const Packet& pkt = q.front();
      memory_[pkt.addr.nodelet][pkt.addr.word] = pkt.value;
      counters_.busy_cycles[dest] += config_.costs.local_write;
      counters_.remote_writes_received[dest]++;
      q.pop_front();
    }
  }
}

RunResult Machine::run_until_idle() {
  if (threadlets_.empty()) throw LifecycleError("run: no threadlets spawned");

  while (live_ > 0) {
    bool progressed = false;
    for (std::size_t i = 0; i < threadlets_.size(); ++i) {  // new spawns join the round
      Threadlet& t = *threadlets_[i];
      if (t.state != ThreadletState::runnable) continue;
      step(t);
      progressed = true;
    }
    if (!progressed && live_ > 0) {
      std::size_t credit = 0, sync = 0;
      for (const auto& t : threadlets_) {
        if (t->state == ThreadletState::blocked_on_spawn_credit) ++credit;
        if (t->state == ThreadletState::blocked_on_sync) ++sync;
      }
      throw DeadlockError("deadlock: no runnable threadlets (" + std::to_string(credit) +
                          " waiting on spawn credit, " + std::to_string(sync) +
                          " waiting on sync, " + std::to_string(live_) + " live)");
    }
  }
  drain_remote_writes();
  assert(EventCounters::sum(counters_.migrations_out) == EventCounters::sum(counters_.migrations_in));
  return {time(), counters_};
}

RunResult Machine::run_to_completion() {
  if (run_finished_) throw LifecycleError("run_to_completion: machine already ran");
  RunResult r = run_until_idle();
  run_finished_ = true;
  return r;
}

SimTime Machine::time() const {
  SimTime t;
  t.makespan_cycles = counters_.max_busy_cycles();
  t.seconds = static_cast<double>(t.makespan_cycles) / config_.clock_hz;
  return t;
}

ThreadletStats Machine::stats_of(ThreadletId id) const { return threadlet(id).stats; }

ThreadletState Machine::state_of(ThreadletId id) const { return threadlet(id).state; }

std::uint32_t Machine::current_nodelet_of(ThreadletId id) const { return threadlet(id).current; }

std::uint64_t Machine::peak_runnable_any_nodelet() const {
  std::uint64_t m = 0;
  for (auto x : peak_occupancy_) m = std::max(m, x);
  return m;
}

std::string Machine::report_json() const {
  ordered_json j;
  j["config"] = config_to_ordered_json(config_);
  SimTime t = time();
  ordered_json tj;
  tj["makespan_cycles"] = t.makespan_cycles;
  tj["seconds"] = t.seconds;
  j["time"] = tj;
  j["counters"] = counters_to_ordered_json(counters_);
  return j.dump();
}

// ---------------------------------------------------------------------------
// Spawn strategies

SpawnStrategy spawn_strategy_from_string(const std::string& s) {
  if (s == "serial" || s == "0") return SpawnStrategy::serial;
  if (s == "recursive" || s == "1") return SpawnStrategy::recursive;
  throw ParseError("unknown spawn strategy: " + s);
}

const char* to_string(SpawnStrategy s) {
  return s == SpawnStrategy::serial ? "serial" : "recursive";
}

namespace {

TaskFn range_spawner_fn(std::shared_ptr<std::vector<PlacedTask>> tasks, std::size_t lo,
                        std::size_t hi);

SimTask<void> range_spawner_body(Ctx& ctx, std::shared_ptr<std::vector<PlacedTask>> tasks,
                                 std::size_t lo, std::size_t hi) {
  std::size_t mid = lo + (hi - lo) / 2;
  TaskFn left = mid - lo == 1 ? (*tasks)[lo].fn : range_spawner_fn(tasks, lo, mid);
  co_await ctx.spawn((*tasks)[lo].nodelet, std::move(left));
  TaskFn right = hi - mid == 1 ? (*tasks)[mid].fn : range_spawner_fn(tasks, mid, hi);
  co_await ctx.spawn((*tasks)[mid].nodelet, std::move(right));
  co_await ctx.sync_children();
}

TaskFn range_spawner_fn(std::shared_ptr<std::vector<PlacedTask>> tasks, std::size_t lo,
                        std::size_t hi) {
  return [tasks, lo, hi](Ctx& ctx) { return range_spawner_body(ctx, tasks, lo, hi); };
}

}  // namespace

SimTask<void> spawn_tasks(Ctx& ctx, std::shared_ptr<std::vector<PlacedTask>> tasks,
                          SpawnStrategy strategy) {
  std::size_t n = tasks->size();
  if (n == 0) co_return;
  if (strategy == SpawnStrategy::serial || n == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      TaskFn f = (*tasks)[i].fn;
      co_await ctx.spawn((*tasks)[i].nodelet, std::move(f));
    }
  } else {
    TaskFn root = range_spawner_fn(tasks, 0, n);
    co_await ctx.spawn((*tasks)[0].nodelet, std::move(root));
  }
}

}  // namespace migrasim
