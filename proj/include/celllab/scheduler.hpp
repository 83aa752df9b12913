#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace celllab::sched {

using Payload = nlohmann::ordered_json;

enum class EventKind {
  formulation_step,
  assembly_start,
  assembly_step,
  assembly_failed,
  handoff,
  channel_queued,
  channel_assigned,
  gantry_transfer_start,
  cycling_start,
  eis_trigger,
  eis_request,
  eis_start,
  eis_end,
  protocol_complete,
  channel_released,
  internal,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);

/// Queue order is (timestamp, phase, seq). Phase lets a handler run after
/// every other event sharing its timestamp (batched dispatch); seq is the
/// insertion counter and breaks all remaining ties.
struct Event {
  double timestamp_s = 0.0;
  int phase = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::internal;
  int cell_id = -1;
  Payload payload;
};

class EventLog {
 public:
  void append(Event e) { events_.push_back(std::move(e)); }
  const std::vector<Event>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }

  /// One JSON object per line: timestamp_s, kind, cell_id, payload.
  void write_jsonl(std::ostream& os) const;
  std::string to_jsonl() const;
  static EventLog read_jsonl(std::istream& is);

 private:
  std::vector<Event> events_;
};

/// Single-threaded discrete-event loop.
class Simulator {
 public:
  using Handler = std::function<void(Simulator&, const Event&)>;

  /// Queues an event. Logged events are appended to the log when they are
  /// processed; unlogged ones only run their handler.
  void schedule(double t, EventKind kind, int cell_id, Payload payload = {}, Handler handler = {},
                int phase = 0, bool logged = true);
  void schedule_internal(double t, Handler handler, int phase = 0);
  /// Appends a record at the current time without queueing.
  void record(EventKind kind, int cell_id, Payload payload = {});

  /// Processes the next event; false if the queue is empty.
  bool step();
  /// Processes every event with timestamp <= t_end; returns the count.
  std::size_t run_until(double t_end);
  std::size_t run();

  double now() const noexcept { return now_; }
  bool empty() const noexcept { return queue_.empty(); }
  std::size_t pending() const noexcept { return queue_.size(); }
  const EventLog& log() const noexcept { return log_; }

 private:
  struct Entry {
    Event event;
    bool logged;
    Handler handler;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.event.timestamp_s != b.event.timestamp_s) return a.event.timestamp_s > b.event.timestamp_s;
      if (a.event.phase != b.event.phase) return a.event.phase > b.event.phase;
      return a.event.seq > b.event.seq;
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
  EventLog log_;
};

enum class EisBinding { per_bank, shared_pool };

struct ChannelConfig {
  int cycling_channels = 48;
  int eis_channels = 2;
  int gantries = 2;
  double gantry_transfer_s = 30.0;
  double eis_duration_s = 600.0;
  double min_rest_s = 1800.0;
  EisBinding binding = EisBinding::per_bank;

  void validate() const;
  int channels_per_bank() const { return cycling_channels / gantries; }
};

struct Assignment {
  int cell_id = -1;
  int channel = -1;
  int bank = -1;  // also the gantry index
  int eis_channel = -1;  // -1 in shared-pool mode until a grant is made
};

struct EisGrant {
  int cell_id = -1;
  int eis_channel = -1;
  double t_ready_s = 0.0;
  double start_s = 0.0;
  double end_s = 0.0;
};

/// Cycling channels, gantries and EIS instruments.
///
/// Channels are split into one bank per gantry. Admissions alternate between
/// banks and take the lowest vacant channel of the preferred bank, falling
/// back to the other bank when it is full; with every channel taken the cell
/// waits in a FIFO. EIS measurements are booked first-come first-served on
/// the cell's instrument (per-bank binding) or the earliest free one
/// (shared pool).
class ChannelBank {
 public:
  explicit ChannelBank(ChannelConfig config);

  const ChannelConfig& config() const noexcept { return config_; }

  /// Assigns a channel now, or queues the cell and returns nullopt.
  std::optional<Assignment> admit_cell(int cell_id, double t);
  /// Frees the cell's channel; returns queued cells admitted as a result.
  std::vector<Assignment> release(int cell_id, double t);

  /// Books an EIS measurement. Requests must arrive in t_ready order.
  /// Throws RestViolation when t_ready precedes the trigger by less than
  /// the minimum rest.
  EisGrant request_eis(int cell_id, double t_trigger_complete, double t_ready);

  /// Reserves the bank's gantry for one transfer; returns its start time.
  double reserve_gantry(int bank, double t);

  std::optional<Assignment> assignment(int cell_id) const;
  int occupied() const noexcept { return occupied_count_; }
  std::size_t queued() const noexcept { return waiting_.size(); }
  double eis_free_at(int eis_channel) const { return eis_free_at_.at(eis_channel); }

 private:
  Assignment assign(int cell_id, int bank);
  std::optional<int> lowest_vacant(int bank) const;

  ChannelConfig config_;
  std::vector<int> occupant_;  // cell id or -1
  std::map<int, Assignment> assignments_;
  std::deque<int> waiting_;
  int next_bank_ = 0;
  int occupied_count_ = 0;
  std::vector<double> eis_free_at_;
  std::vector<double> gantry_free_at_;
};

/// Cycling between EIS measurements. `rest_s` follows the cycling block;
/// when `eis` is set the cell then requests a measurement.
struct CyclingSegment {
  double cycling_s = 0.0;
  double rest_s = 0.0;
  bool eis = false;
  int trigger = -1;
  int cycle = 0;
  double c_rate = 0.0;
};

struct CellWorkload {
  int cell_id = -1;
  std::vector<CyclingSegment> segments;
};

/// Stage-III process: handoff, channel admission, gantry transfer, cycling,
/// rest, queued EIS and channel release, all on a shared Simulator.
class CharacterizationStage {
 public:
  CharacterizationStage(Simulator& sim, ChannelConfig config);

  /// Called at handoff time (sim.now()); queues the handoff event.
  void submit(CellWorkload workload, double t_handoff);

  const ChannelBank& bank() const noexcept { return bank_; }
  std::size_t completed() const noexcept { return completed_; }
  std::size_t submitted() const noexcept { return workloads_.size(); }

 private:
  struct PendingEis {
    int cell_id;
    std::size_t segment;
    double t_trigger;
    double t_ready;
  };

  void on_handoff(int cell_id);
  void start_transfer(const Assignment& a);
  void start_segment(int cell_id, std::size_t index);
  void finish_segment(int cell_id, std::size_t index);
  void dispatch_eis();
  void complete(int cell_id);

  Simulator& sim_;
  ChannelBank bank_;
  std::map<int, CellWorkload> workloads_;
  std::vector<PendingEis> pending_eis_;
  bool eis_dispatch_scheduled_ = false;
  std::size_t completed_ = 0;
};

}  // namespace celllab::sched
