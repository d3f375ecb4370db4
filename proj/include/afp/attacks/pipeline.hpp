#pragma once

// The only surface an attacker gets: feed a flow in, get a label and a
// side-channel reading back. Nothing here exposes a model.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "afp/flowdata/dataset.hpp"
#include "afp/sidechannel/sidechannel.hpp"

namespace afp::attacks {

using flowdata::Label;
using sidechannel::SideChannelSample;

struct QueryResponse {
  Label label = Label::benign;
  SideChannelSample side;
};

class BlackBoxPipeline {
 public:
  virtual ~BlackBoxPipeline() = default;
  virtual QueryResponse query(std::span<const double> x) = 0;
  virtual std::size_t dims() const = 0;
};

struct QueryBudget {
  std::size_t max_queries = 0;
  std::size_t spent = 0;

  std::size_t remaining() const noexcept { return max_queries - spent; }
  bool exhausted() const noexcept { return spent >= max_queries; }
};

struct ProbeObservation {
  std::vector<double> query;
  Label label = Label::benign;
  SideChannelSample side;
  std::size_t step = 0;
};

/// Budget-enforcing wrapper. Every forwarded call is counted and (optionally)
/// recorded; once the budget is spent, query() returns nullopt without
/// touching the pipeline.
class MeteredPipeline {
 public:
  MeteredPipeline(BlackBoxPipeline& inner, QueryBudget budget, bool record = true)
      : inner_(inner), budget_(budget), record_(record) {}
  MeteredPipeline(const MeteredPipeline&) = delete;
  MeteredPipeline& operator=(const MeteredPipeline&) = delete;

  std::optional<QueryResponse> query(std::span<const double> x);

  std::size_t dims() const { return inner_.dims(); }
  const QueryBudget& budget() const noexcept { return budget_; }
  const std::vector<ProbeObservation>& trace() const noexcept { return trace_; }

 private:
  BlackBoxPipeline& inner_;
  QueryBudget budget_;
  bool record_;
  std::vector<ProbeObservation> trace_;
};

/// One JSON object per line: step, label, response_time, cpu_cost, query.
void write_probe_trace(std::ostream& out, std::span<const ProbeObservation> trace);

}  // namespace afp::attacks
