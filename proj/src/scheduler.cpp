#include "celllab/scheduler.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <sstream>
#include <utility>

#include "celllab/errors.hpp"

namespace celllab::sched {
namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 16> kKindNames{{
    {EventKind::formulation_step, "formulation_step"},
    {EventKind::assembly_start, "assembly_start"},
    {EventKind::assembly_step, "assembly_step"},
    {EventKind::assembly_failed, "assembly_failed"},
    {EventKind::handoff, "handoff"},
    {EventKind::channel_queued, "channel_queued"},
    {EventKind::channel_assigned, "channel_assigned"},
    {EventKind::gantry_transfer_start, "gantry_transfer_start"},
    {EventKind::cycling_start, "cycling_start"},
    {EventKind::eis_trigger, "eis_trigger"},
    {EventKind::eis_request, "eis_request"},
    {EventKind::eis_start, "eis_start"},
    {EventKind::eis_end, "eis_end"},
    {EventKind::protocol_complete, "protocol_complete"},
    {EventKind::channel_released, "channel_released"},
    {EventKind::internal, "internal"},
}};

// Rest comparisons tolerate accumulated floating-point drift in timestamps.
constexpr double kTimeEps = 1e-6;

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "internal";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// EventLog

void EventLog::write_jsonl(std::ostream& os) const {
  for (const auto& e : events_) {
    Payload line;
    line["timestamp_s"] = e.timestamp_s;
    line["kind"] = to_string(e.kind);
    line["cell_id"] = e.cell_id;
    line["payload"] = e.payload.is_null() ? Payload::object() : e.payload;
    os << line.dump() << '\n';
  }
}

std::string EventLog::to_jsonl() const {
  std::ostringstream os;
  write_jsonl(os);
  return os.str();
}

EventLog EventLog::read_jsonl(std::istream& is) {
  EventLog log;
  std::string line;
  std::uint64_t seq = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Payload j;
    try {
      j = Payload::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("event log: ") + e.what());
    }
    Event e;
    e.timestamp_s = j.at("timestamp_s").get<double>();
    auto kind = event_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw ParseError("event log: unknown kind " + j.at("kind").get<std::string>());
    e.kind = *kind;
    e.cell_id = j.at("cell_id").get<int>();
    e.payload = j.at("payload");
    e.seq = seq++;
    log.append(std::move(e));
  }
  return log;
}

// ---------------------------------------------------------------------------
// Simulator

void Simulator::schedule(double t, EventKind kind, int cell_id, Payload payload, Handler handler,
                         int phase, bool logged) {
  if (t < now_) throw SchedulerError("cannot schedule an event in the past");
  Entry entry{Event{t, phase, next_seq_++, kind, cell_id, std::move(payload)}, logged,
              std::move(handler)};
  queue_.push(std::move(entry));
}

void Simulator::schedule_internal(double t, Handler handler, int phase) {
  schedule(t, EventKind::internal, -1, {}, std::move(handler), phase, false);
}

void Simulator::record(EventKind kind, int cell_id, Payload payload) {
  log_.append(Event{now_, 0, next_seq_++, kind, cell_id, std::move(payload)});
}

bool Simulator::step() {
  if (queue_.empty()) return false;
  Entry entry = queue_.top();
  queue_.pop();
  now_ = entry.event.timestamp_s;
  if (entry.logged) log_.append(entry.event);
  if (entry.handler) entry.handler(*this, entry.event);
  return true;
}

std::size_t Simulator::run_until(double t_end) {
  std::size_t n = 0;
  while (!queue_.empty() && queue_.top().event.timestamp_s <= t_end) {
    step();
    ++n;
  }
  return n;
}

std::size_t Simulator::run() {
  std::size_t n = 0;
  while (step()) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// ChannelBank

void ChannelConfig::validate() const {
  if (cycling_channels <= 0) throw SchedulerError("cycling_channels must be > 0");
  if (gantries <= 0) throw SchedulerError("gantries must be > 0");
  if (cycling_channels % gantries != 0)
    throw SchedulerError("cycling_channels must divide evenly between gantries");
  if (eis_channels <= 0) throw SchedulerError("eis_channels must be > 0");
  if (gantry_transfer_s < 0.0 || eis_duration_s < 0.0 || min_rest_s < 0.0)
    throw SchedulerError("durations must be >= 0");
}

ChannelBank::ChannelBank(ChannelConfig config)
    : config_(config),
      occupant_(static_cast<std::size_t>(config.cycling_channels), -1),
      eis_free_at_(static_cast<std::size_t>(config.eis_channels), 0.0),
      gantry_free_at_(static_cast<std::size_t>(config.gantries), 0.0) {
  config_.validate();
}

std::optional<int> ChannelBank::lowest_vacant(int bank) const {
  const int per_bank = config_.channels_per_bank();
  for (int ch = bank * per_bank; ch < (bank + 1) * per_bank; ++ch)
    if (occupant_[static_cast<std::size_t>(ch)] < 0) return ch;
  return std::nullopt;
}

Assignment ChannelBank::assign(int cell_id, int bank) {
  const int channel = *lowest_vacant(bank);
  occupant_[static_cast<std::size_t>(channel)] = cell_id;
  ++occupied_count_;
  Assignment a{cell_id, channel, bank,
               config_.binding == EisBinding::per_bank ? bank % config_.eis_channels : -1};
  assignments_[cell_id] = a;
  return a;
}

std::optional<Assignment> ChannelBank::admit_cell(int cell_id, double /*t*/) {
  if (assignments_.contains(cell_id)) throw SchedulerError("cell already holds a channel");
  for (int k = 0; k < config_.gantries; ++k) {
    const int bank = (next_bank_ + k) % config_.gantries;
    if (lowest_vacant(bank)) {
      next_bank_ = (next_bank_ + 1) % config_.gantries;
      return assign(cell_id, bank);
    }
  }
  waiting_.push_back(cell_id);
  return std::nullopt;
}

std::vector<Assignment> ChannelBank::release(int cell_id, double t) {
  auto it = assignments_.find(cell_id);
  if (it == assignments_.end()) throw SchedulerError("release of a cell without a channel");
  occupant_[static_cast<std::size_t>(it->second.channel)] = -1;
  --occupied_count_;
  assignments_.erase(it);

  std::vector<Assignment> admitted;
  while (!waiting_.empty() && occupied_count_ < config_.cycling_channels) {
    const int next = waiting_.front();
    waiting_.pop_front();
    for (int k = 0; k < config_.gantries; ++k) {
      const int bank = (next_bank_ + k) % config_.gantries;
      if (lowest_vacant(bank)) {
        next_bank_ = (next_bank_ + 1) % config_.gantries;
        admitted.push_back(assign(next, bank));
        break;
      }
    }
  }
  (void)t;
  return admitted;
}

EisGrant ChannelBank::request_eis(int cell_id, double t_trigger_complete, double t_ready) {
  if (t_ready + kTimeEps < t_trigger_complete + config_.min_rest_s)
    throw RestViolation("EIS requested before the minimum rest elapsed");
  auto it = assignments_.find(cell_id);
  if (it == assignments_.end()) throw SchedulerError("EIS request from a cell without a channel");

  int channel = it->second.eis_channel;
  if (config_.binding == EisBinding::shared_pool) {
    channel = 0;
    for (int k = 1; k < config_.eis_channels; ++k) {
      const double free_k = std::max(t_ready, eis_free_at_[static_cast<std::size_t>(k)]);
      const double free_best = std::max(t_ready, eis_free_at_[static_cast<std::size_t>(channel)]);
      if (free_k < free_best) channel = k;
    }
  }
  auto& free_at = eis_free_at_[static_cast<std::size_t>(channel)];
  const double start = std::max(t_ready, free_at);
  free_at = start + config_.eis_duration_s;
  return {cell_id, channel, t_ready, start, free_at};
}

double ChannelBank::reserve_gantry(int bank, double t) {
  auto& free_at = gantry_free_at_.at(static_cast<std::size_t>(bank));
  const double start = std::max(t, free_at);
  free_at = start + config_.gantry_transfer_s;
  return start;
}

std::optional<Assignment> ChannelBank::assignment(int cell_id) const {
  auto it = assignments_.find(cell_id);
  if (it == assignments_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// CharacterizationStage

CharacterizationStage::CharacterizationStage(Simulator& sim, ChannelConfig config)
    : sim_(sim), bank_(config) {}

void CharacterizationStage::submit(CellWorkload workload, double t_handoff) {
  const int id = workload.cell_id;
  if (workloads_.contains(id)) throw SchedulerError("cell submitted twice");
  workloads_.emplace(id, std::move(workload));
  sim_.schedule(t_handoff, EventKind::handoff, id, {},
                [this, id](Simulator&, const Event&) { on_handoff(id); });
}

void CharacterizationStage::on_handoff(int cell_id) {
  auto a = bank_.admit_cell(cell_id, sim_.now());
  if (!a) {
    sim_.record(EventKind::channel_queued, cell_id, {{"queue_length", bank_.queued()}});
    return;
  }
  start_transfer(*a);
}

void CharacterizationStage::start_transfer(const Assignment& a) {
  sim_.record(EventKind::channel_assigned, a.cell_id,
              {{"channel", a.channel}, {"gantry", a.bank}, {"eis_channel", a.eis_channel}});
  const double start = bank_.reserve_gantry(a.bank, sim_.now());
  const double end = start + bank_.config().gantry_transfer_s;
  const int id = a.cell_id;
  sim_.schedule(start, EventKind::gantry_transfer_start, id,
                {{"gantry", a.bank}, {"channel", a.channel}, {"end_s", end}});
  sim_.schedule(end, EventKind::cycling_start, id, {{"channel", a.channel}},
                [this, id](Simulator&, const Event&) { start_segment(id, 0); });
}

void CharacterizationStage::start_segment(int cell_id, std::size_t index) {
  const auto& segments = workloads_.at(cell_id).segments;
  if (index >= segments.size()) {
    complete(cell_id);
    return;
  }
  const auto& seg = segments[index];
  const double t_end = sim_.now() + seg.cycling_s;
  sim_.schedule_internal(t_end, [this, cell_id, index](Simulator&, const Event&) {
    finish_segment(cell_id, index);
  });
}

void CharacterizationStage::finish_segment(int cell_id, std::size_t index) {
  const auto& seg = workloads_.at(cell_id).segments[index];
  if (!seg.eis) {
    if (seg.rest_s > 0.0) {
      sim_.schedule_internal(sim_.now() + seg.rest_s, [this, cell_id, index](Simulator&, const Event&) {
        start_segment(cell_id, index + 1);
      });
    } else {
      start_segment(cell_id, index + 1);
    }
    return;
  }
  const double t_trigger = sim_.now();
  sim_.record(EventKind::eis_trigger, cell_id,
              {{"trigger", seg.trigger}, {"cycle", seg.cycle}, {"c_rate", seg.c_rate}});
  const double t_ready = t_trigger + seg.rest_s;
  sim_.schedule(t_ready, EventKind::eis_request, cell_id,
                {{"trigger", seg.trigger}, {"trigger_complete_s", t_trigger}},
                [this, cell_id, index, t_trigger](Simulator& sim, const Event&) {
                  pending_eis_.push_back({cell_id, index, t_trigger, sim.now()});
                  if (!eis_dispatch_scheduled_) {
                    eis_dispatch_scheduled_ = true;
                    sim.schedule_internal(sim.now(), [this](Simulator&, const Event&) { dispatch_eis(); },
                                          /*phase=*/1);
                  }
                });
}

void CharacterizationStage::dispatch_eis() {
  eis_dispatch_scheduled_ = false;
  auto batch = std::move(pending_eis_);
  pending_eis_.clear();
  std::stable_sort(batch.begin(), batch.end(), [](const PendingEis& a, const PendingEis& b) {
    if (a.t_ready != b.t_ready) return a.t_ready < b.t_ready;
    return a.cell_id < b.cell_id;
  });
  for (const auto& req : batch) {
    const auto grant = bank_.request_eis(req.cell_id, req.t_trigger, req.t_ready);
    const auto& seg = workloads_.at(req.cell_id).segments[req.segment];
    const int id = req.cell_id;
    const std::size_t index = req.segment;
    sim_.schedule(grant.start_s, EventKind::eis_start, id,
                  {{"eis_channel", grant.eis_channel},
                   {"trigger", seg.trigger},
                   {"cycle", seg.cycle},
                   {"c_rate", seg.c_rate},
                   {"trigger_complete_s", req.t_trigger},
                   {"ready_s", req.t_ready},
                   {"wait_s", grant.start_s - req.t_ready}});
    sim_.schedule(grant.end_s, EventKind::eis_end, id,
                  {{"eis_channel", grant.eis_channel}, {"trigger", seg.trigger}},
                  [this, id, index](Simulator&, const Event&) { start_segment(id, index + 1); });
  }
}

void CharacterizationStage::complete(int cell_id) {
  sim_.record(EventKind::protocol_complete, cell_id);
  const auto a = bank_.assignment(cell_id);
  const auto admitted = bank_.release(cell_id, sim_.now());
  sim_.record(EventKind::channel_released, cell_id, {{"channel", a ? a->channel : -1}});
  ++completed_;
  for (const auto& next : admitted) start_transfer(next);
}

}  // namespace celllab::sched
