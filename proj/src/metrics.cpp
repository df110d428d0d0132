#include "gridflow/metrics.hpp"

#include <algorithm>

namespace gridflow::metrics {

MetricsRecorder::MetricsRecorder(double interval) : interval_(interval) {
  if (!(interval > 0.0)) throw engine::SimulationError("metrics interval must be positive");
}

void MetricsRecorder::watch_cpu(std::string center, std::vector<const engine::SharedResource*> resources) {
  groups_.push_back(CpuGroup{std::move(center), std::move(resources), 0.0, 0.0});
}

void MetricsRecorder::start(engine::Simulator& sim) {
  last_ = sim.now();
  if (net_) {
    const std::size_t n = net_->topology().links().size();
    link_bits_.assign(n, 0.0);
    link_capacity_.assign(n, 0.0);
    for (std::size_t l = 0; l < n; ++l) {
      link_bits_[l] = net_->link_bits_until(l, last_);
      link_capacity_[l] = net_->link_capacity_integral(l, last_);
    }
  }
  for (auto& g : groups_) {
    g.served = 0.0;
    g.capacity = 0.0;
    for (const auto* r : g.resources) {
      g.served += r->served_until(last_);
      g.capacity += r->capacity_integral_until(last_);
    }
  }
  sim.schedule(last_ + interval_, id(), engine::EventKind::Wake);
}

void MetricsRecorder::on_event(engine::Simulator& sim, const engine::SimEvent&) {
  sample(sim.now());
  sim.schedule(sim.now() + interval_, id(), engine::EventKind::Wake);
}

void MetricsRecorder::sample(double t) {
  if (!(t > last_)) return;
  const double window = t - last_;
  if (net_) {
    for (std::size_t l = 0; l < link_bits_.size(); ++l) {
      const double bits = net_->link_bits_until(l, t);
      const double cap = net_->link_capacity_integral(l, t);
      const double d_bits = bits - link_bits_[l];
      const double d_cap = cap - link_capacity_[l];
      links_.push_back(LinkSample{t, net_->topology().links()[l].id, d_bits / window,
                                  d_cap > 0.0 ? std::clamp(d_bits / d_cap, 0.0, 1.0) : 0.0});
      link_bits_[l] = bits;
      link_capacity_[l] = cap;
    }
  }
  for (auto& g : groups_) {
    double served = 0.0;
    double capacity = 0.0;
    for (const auto* r : g.resources) {
      served += r->served_until(t);
      capacity += r->capacity_integral_until(t);
    }
    const double d_served = served - g.served;
    const double d_cap = capacity - g.capacity;
    cpu_.push_back(CpuSample{t, g.center, d_cap > 0.0 ? std::clamp(d_served / d_cap, 0.0, 1.0) : 0.0});
    g.served = served;
    g.capacity = capacity;
  }
  samples_.push_back(MetricsSample{t, net_ ? net_->active().size() : 0, job_counter_ ? job_counter_() : 0});
  last_ = t;
}

}  // namespace gridflow::metrics
