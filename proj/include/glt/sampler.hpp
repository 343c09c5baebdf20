#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "glt/energy.hpp"
#include "glt/geometry.hpp"
#include "glt/local_tessellator.hpp"
#include "glt/rng.hpp"

namespace glt {

struct SamplerParams {
  double z = 2000.0;     // activity
  double sigma = 0.015;  // per-axis sd of move displacements
  double r0 = 0.2;       // marks are uniform on (0, r0]
  std::uint64_t seed = 0;
  std::uint64_t reanchor_every = 10000;  // accepted steps between full energy recomputations

  void validate() const;  // throws InvalidParameter
};

struct StoppingCriterion {
  double delta = 0.002;
  std::uint64_t t = 500000;
  std::uint64_t max_steps = 10000000;

  void validate() const;
};

enum class ProposalKind { Birth = 0, Death = 1, Move = 2 };
std::string_view to_string(ProposalKind k);

struct AcceptanceCounts {
  std::array<std::uint64_t, 3> proposed{};
  std::array<std::uint64_t, 3> accepted{};

  std::uint64_t total_accepted() const { return accepted[0] + accepted[1] + accepted[2]; }
};

/// min(1, c exp(e_before - e_after)); 0 when e_after is +inf.
double acceptance_probability(double c, double e_before, double e_after);

/// Decision rule used by the chain: log u < log c + e_before - e_after.
bool accept(double u, double c, double e_before, double e_after);

struct StepOutcome {
  ProposalKind kind = ProposalKind::Birth;
  bool accepted = false;
  std::size_t dropped = 0;  // generators removed because their cell became empty
};

/// Configuration, cached tessellation and energy aggregates, RNG and
/// counters of one chain. With the null model (E = 0) no geometry is kept.
class ChainState {
 public:
  /// Throws InvalidParameter when `initial` is inadmissible. Generators of
  /// empty cells are dropped.
  ChainState(std::shared_ptr<const EnergyModel> model, SamplerParams params, Configuration initial);

  const EnergyModel& model() const { return *model_; }
  const SamplerParams& params() const { return params_; }
  const Configuration& configuration() const;
  /// Throws InvalidParameter for the null model.
  const Tessellation& tessellation() const;
  const EnergyBreakdown& energy() const { return energy_; }
  std::uint64_t steps() const { return steps_; }
  const AcceptanceCounts& counts() const { return counts_; }
  Rng& rng() { return rng_; }
  bool tracks_geometry() const { return engine_.has_value(); }

  /// One birth-death-move step. Draw order: kind, point, mark, acceptance
  /// uniform.
  StepOutcome step();

  /// Recompute the energy from the cached tessellation.
  void reanchor();

 private:
  double proposal_energy(const ConfigurationChange& change, std::optional<ProposalEnergy>& out) const;

  std::shared_ptr<const EnergyModel> model_;
  SamplerParams params_;
  Rng rng_;
  std::optional<LocalTessellator> engine_;
  Configuration plain_;  // null model only
  EnergyAccumulator acc_;
  EnergyBreakdown energy_;
  std::uint64_t steps_ = 0;
  std::uint64_t accepted_since_anchor_ = 0;
  AcceptanceCounts counts_;
};

StepOutcome evolution_step(ChainState& state);

struct TraceRow {
  std::uint64_t step = 0;
  EnergyBreakdown energy;
  std::size_t n_cells = 0;
};

enum class Termination { StepsCompleted, Converged, CapReached, Quiet };
std::string_view to_string(Termination t);

struct Diagnostics {
  AcceptanceCounts counts;
  std::vector<TraceRow> trace;  // every log_every steps, plus the first and last state
  std::uint64_t steps = 0;
  Termination termination = Termination::StepsCompleted;
  double seconds = 0.0;
  std::uint64_t dropped_generators = 0;
};

struct RunResult {
  Configuration configuration;
  EnergyBreakdown energy;
  Diagnostics diagnostics;
};

struct RunOptions {
  std::uint64_t log_every = 1000;
};

/// Finite-energy start: round(z) (or target_n) uniform marked points, then
/// cells violating the hardcore are repaired (generators with a too thin cell
/// are deleted, others resampled). Falls back to a body-centred cubic
/// lattice with equal radii r0/2. Throws InitializationFailure.
Configuration initial_admissible(const EnergyModel& model, const SamplerParams& params,
                                 std::optional<std::size_t> target_n, Rng& rng);

/// M uniform marked points, resampled until every cell is nonempty and the
/// energy is finite. Throws InitializationFailure.
Configuration initial_nonempty(const EnergyModel& model, const SamplerParams& params, std::size_t m,
                               Rng& rng);

RunResult simulate(std::shared_ptr<const EnergyModel> model, const SamplerParams& params,
                   std::uint64_t steps, Configuration initial, const RunOptions& options = {});

/// Max and min of the last t values.
class EnergyWindow {
 public:
  explicit EnergyWindow(std::uint64_t t) : t_(t) {}
  void push(double e);
  bool full() const { return count_ >= t_; }
  double span() const;

 private:
  std::uint64_t t_;
  std::uint64_t count_ = 0;
  std::deque<std::pair<std::uint64_t, double>> max_, min_;
};

RunResult reconstruct(std::shared_ptr<const EnergyModel> model, const SamplerParams& params,
                      const StoppingCriterion& stop, Configuration initial,
                      const RunOptions& options = {});

struct GreedyParams {
  std::uint64_t quiet_limit = 50000;  // L
  std::uint64_t proposal_budget = 10000;
  std::uint64_t max_iterations = 10000000;
};

/// Replace uniformly chosen generators by uniform marked points with a
/// nonempty cell (leaving all other cells nonempty); keep strict energy
/// decreases. Throws RejectionBudgetExhausted.
RunResult greedy_reconstruct(std::shared_ptr<const EnergyModel> model, const SamplerParams& params,
                             const GreedyParams& greedy, Configuration initial,
                             const RunOptions& options = {});

/// kind,proposed,accepted,rate
void write_acceptance_csv(std::ostream& out, const AcceptanceCounts& counts);
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace glt
