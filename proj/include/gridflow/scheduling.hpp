#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gridflow/datalayer.hpp"
#include "gridflow/engine.hpp"

namespace gridflow::sched {

enum class JobType : std::uint8_t { Production, Reproduction, Analysis, Generic };
const char* to_string(JobType type);

struct Job {
  std::uint64_t id = 0;
  JobType type = JobType::Generic;
  double cpu_work = 0.0;  // operations
  std::vector<data::FileId> inputs;
  std::string origin;
  double submit_time = 0.0;
  bool exported = false;
};

struct JobRecord {
  std::uint64_t id = 0;
  JobType type = JobType::Generic;
  std::string center;
  double submit_time = 0.0;
  double start_time = 0.0;  // CPU phase start
  double end_time = 0.0;
  double staging_time = 0.0;
  bool exported = false;
  bool failed = false;
};

struct FarmSpec {
  std::string center;
  int cpu_count = 1;
  double cpu_rate = 1e9;  // operations per second per CPU
  int job_slots = 0;      // concurrent jobs on the farm, 0 = one per CPU
  double threshold = 0.8; // export when local load exceeds this
};

struct Placement {
  std::size_t center = 0;
  bool exported = false;
};

/// Runs locally while the local load is at most `threshold`; otherwise
/// exports to the remote center with the smallest load (ties by index).
Placement choose_placement(std::size_t local, std::span<const double> loads, double threshold);

/// Relay map of the transfer agents: relay center -> centers it forwards to.
struct AgentPlan {
  std::map<std::string, std::vector<std::string>> relays;

  /// Cycles and centers claimed by two relays are rejected.
  std::vector<std::string> validate() const;
  std::optional<std::string> parent_of(const std::string& center) const;
};

/// Who sends to whom for one fan-out. `direct` are the copies the source
/// sends itself; `forwards` maps each relay to the copies it sends on.
struct FanoutSchedule {
  std::vector<std::string> direct;
  std::map<std::string, std::vector<std::string>> forwards;

  std::size_t copies() const;
};

FanoutSchedule plan_fanout(const std::string& source, const std::set<std::string>& destinations,
                           const AgentPlan& plan);

/// Per-center job schedulers sharing one view of every farm's load.
/// Each farm is one shared resource of aggregate capacity; a running job is
/// one claim capped at a single CPU's rate.
class GridScheduler : public engine::Actor {
 public:
  using Done = std::function<void(engine::Simulator&, const JobRecord&)>;

  GridScheduler(data::DataService& data, std::vector<FarmSpec> farms);

  /// Creates the farm resources. Call once after adding to the simulator.
  void start(engine::Simulator& sim);

  Placement submit(engine::Simulator& sim, Job job, const std::string& center, Done done = {});

  std::size_t center_index(const std::string& center) const;
  const FarmSpec& farm(std::size_t i) const { return farms_.at(i).spec; }
  std::size_t farm_count() const { return farms_.size(); }
  const engine::SharedResource& resource(std::size_t i) const { return *farms_.at(i).resource; }

  /// Active plus queued CPU demand over farm capacity.
  double load(std::size_t i) const;
  std::vector<double> loads() const;

  const std::vector<JobRecord>& records() const { return records_; }
  std::size_t running(std::size_t i) const { return static_cast<std::size_t>(farms_.at(i).running); }
  std::size_t queued(std::size_t i) const { return farms_.at(i).queue.size(); }

 private:
  struct Entry {
    Job job;
    bool staged = false;
    bool failed = false;
    std::size_t waiting_inputs = 0;
    double staging_done = 0.0;
    double cpu_start = 0.0;
    Done done;
  };
  struct Farm {
    FarmSpec spec;
    engine::SharedResource* resource = nullptr;
    std::deque<std::uint64_t> queue;  // FIFO of job ids awaiting a slot
    int running = 0;
    int slots = 1;
  };

  void stage(engine::Simulator& sim, std::size_t center, std::uint64_t job_id);
  void dispatch(engine::Simulator& sim, std::size_t center);
  void finish(engine::Simulator& sim, std::size_t center, std::uint64_t job_id, bool failed);

  data::DataService& data_;
  std::vector<Farm> farms_;
  std::map<std::uint64_t, Entry> jobs_;
  std::vector<JobRecord> records_;
};

/// Executes fan-outs over the data service: the source ships each direct
/// copy, every relay forwards on receipt.
class TransferAgents {
 public:
  using Delivered = std::function<void(engine::Simulator&, const std::string& center, const data::FetchResult&)>;

  TransferAgents(data::DataService& data, AgentPlan plan, bool enabled)
      : data_(data), plan_(std::move(plan)), enabled_(enabled) {}

  const AgentPlan& active_plan() const { return enabled_ ? plan_ : empty_; }

  /// `on_delivery` runs for every copy landing at a requested destination.
  void fanout(engine::Simulator& sim, data::FileId file, const std::string& source,
              const std::set<std::string>& destinations, Delivered on_delivery);

 private:
  void send(engine::Simulator& sim, data::FileId file, const std::string& from, const std::string& to,
            std::shared_ptr<const FanoutSchedule> schedule, std::shared_ptr<const std::set<std::string>> destinations,
            Delivered on_delivery);

  data::DataService& data_;
  AgentPlan plan_;
  AgentPlan empty_;
  bool enabled_;
};

}  // namespace gridflow::sched
