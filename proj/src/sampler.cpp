#include "glt/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "glt/errors.hpp"

namespace glt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec3 uniform_point(Rng& rng) {
  const double x = rng.uniform();
  const double y = rng.uniform();
  const double z = rng.uniform();
  return {x, y, z};
}

Vec3 gaussian_step(Rng& rng, const Vec3& from, double sigma) {
  const double dx = rng.normal(0.0, sigma);
  const double dy = rng.normal(0.0, sigma);
  const double dz = rng.normal(0.0, sigma);
  return wrap_to_torus(from + Vec3{dx, dy, dz});
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void record(Diagnostics& d, std::uint64_t step, const EnergyBreakdown& e, std::size_t n) {
  if (!d.trace.empty() && d.trace.back().step == step) return;
  d.trace.push_back({step, e, n});
}

}  // namespace

void SamplerParams::validate() const {
  if (!(z > 0.0) || !std::isfinite(z)) throw InvalidParameter("activity z must be > 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidParameter("sigma must be > 0");
  if (!(r0 > 0.0) || !std::isfinite(r0)) throw InvalidParameter("R0 must be > 0");
  if (reanchor_every == 0) throw InvalidParameter("re-anchor interval must be positive");
}

void StoppingCriterion::validate() const {
  if (!(delta > 0.0)) throw InvalidParameter("stopping delta must be > 0");
  if (t == 0) throw InvalidParameter("stopping window t must be positive");
  if (max_steps == 0) throw InvalidParameter("iteration cap must be positive");
}

std::string_view to_string(ProposalKind k) {
  switch (k) {
    case ProposalKind::Birth: return "birth";
    case ProposalKind::Death: return "death";
    case ProposalKind::Move: return "move";
  }
  return "?";
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::StepsCompleted: return "steps_completed";
    case Termination::Converged: return "converged";
    case Termination::CapReached: return "cap_reached";
    case Termination::Quiet: return "quiet";
  }
  return "?";
}

double acceptance_probability(double c, double e_before, double e_after) {
  if (!std::isfinite(e_after)) return 0.0;
  return std::min(1.0, c * std::exp(e_before - e_after));
}

bool accept(double u, double c, double e_before, double e_after) {
  if (!std::isfinite(e_after)) return false;
  return std::log(u) < std::log(c) + (e_before - e_after);
}

ChainState::ChainState(std::shared_ptr<const EnergyModel> model, SamplerParams params,
                       Configuration initial)
    : model_(std::move(model)), params_(params), rng_(params.seed) {
  params_.validate();
  model_->validate();
  if (model_->is_null()) {
    plain_ = std::move(initial);
    return;
  }
  engine_.emplace(std::move(initial));
  engine_->purge_excluded();
  acc_ = EnergyAccumulator(*model_, engine_->tessellation());
  energy_ = acc_.breakdown();
  if (!energy_.hardcore_finite)
    throw InvalidParameter("initial configuration violates the hardcore constraints");
}

const Configuration& ChainState::configuration() const {
  return engine_ ? engine_->configuration() : plain_;
}

const Tessellation& ChainState::tessellation() const {
  if (!engine_) throw InvalidParameter("the null-model chain keeps no tessellation");
  return engine_->tessellation();
}

void ChainState::reanchor() {
  if (!engine_) return;
  acc_ = EnergyAccumulator(*model_, engine_->tessellation());
  energy_ = acc_.breakdown();
  accepted_since_anchor_ = 0;
}

double ChainState::proposal_energy(const ConfigurationChange& change,
                                   std::optional<ProposalEnergy>& out) const {
  if (!engine_) return 0.0;
  try {
    out.emplace(energy_delta(*model_, *engine_, acc_, change, true));
  } catch (const DegenerateInput&) {
    return kInf;
  }
  return out->breakdown.total;
}

StepOutcome ChainState::step() {
  ++steps_;
  StepOutcome outcome;
  outcome.kind = static_cast<ProposalKind>(rng_.index(3));
  const auto& config = configuration();
  const std::size_t n = config.size();
  const double z = params_.z;

  std::optional<ConfigurationChange> change;
  double c = 1.0;
  switch (outcome.kind) {
    case ProposalKind::Birth: {
      const Vec3 y = uniform_point(rng_);
      const double r = rng_.uniform_open_closed(params_.r0);
      change = Insert{{config.next_id(), y, r}};
      c = z / static_cast<double>(n + 1);
      break;
    }
    case ProposalKind::Death: {
      if (n > 0) {
        change = Delete{config.by_index(rng_.index(n)).id};
        c = static_cast<double>(n) / z;
      }
      break;
    }
    case ProposalKind::Move: {
      if (n > 0) {
        const auto& g = config.by_index(rng_.index(n));
        const Vec3 y = gaussian_step(rng_, g.position, params_.sigma);
        const double r = rng_.uniform_open_closed(params_.r0);
        change = Move{g.id, y, r};
      }
      break;
    }
  }
  const double u = rng_.uniform();
  const auto k = static_cast<std::size_t>(outcome.kind);
  ++counts_.proposed[k];
  if (!change) return outcome;

  if (!engine_) {
    // E = 0: only coinciding positions can make a proposal impossible.
    if (const auto* ins = std::get_if<Insert>(&*change); ins && plain_.occupied(ins->generator.position))
      return outcome;
    if (const auto* mv = std::get_if<Move>(&*change); mv && plain_.occupied(mv->position))
      return outcome;
    if (!accept(u, c, 0.0, 0.0)) return outcome;
    plain_.apply(*change);
    outcome.accepted = true;
    ++counts_.accepted[k];
    return outcome;
  }

  std::optional<ProposalEnergy> next;
  const double e_after = proposal_energy(*change, next);
  if (!accept(u, c, energy_.total, e_after)) return outcome;

  outcome.dropped = engine_->commit(next->proposal, EmptyCellPolicy::RemoveGenerator).size();
  acc_ = std::move(next->accumulator);
  energy_ = std::move(next->breakdown);
  outcome.accepted = true;
  ++counts_.accepted[k];
  if (++accepted_since_anchor_ >= params_.reanchor_every) reanchor();
  return outcome;
}

StepOutcome evolution_step(ChainState& state) { return state.step(); }

// --- initial configurations ------------------------------------------------

namespace {

Configuration binomial(std::size_t n, double r0, Rng& rng) {
  Configuration c;
  while (c.size() < n) {
    const Vec3 y = uniform_point(rng);
    const double r = rng.uniform_open_closed(r0);
    if (!c.occupied(y)) c.insert(y, r);
  }
  return c;
}

// Body-centred cubic lattice with k^3 cubes of side a = 1/k: every cell is a
// truncated octahedron with h_min = sqrt(3) a / 4 and h_max = a / 2. k is
// taken near cbrt(n / 2) when that fits the hardcore window with a margin.
int bcc_side(std::size_t n, const HardcoreParams& p) {
  constexpr double kInner = 0.4330127018922193;  // sqrt(3) / 4
  auto fits = [&](int k) {
    return (!p.alpha || kInner / k >= 1.25 * *p.alpha) && (!p.beta || 0.5 / k <= *p.beta / 1.25);
  };
  const int k = std::max(1, static_cast<int>(std::lround(std::cbrt(0.5 * static_cast<double>(n)))));
  if (fits(k)) return k;
  if (p.alpha && p.beta)
    return std::max(1, static_cast<int>(std::lround((kInner + 0.5) / (*p.alpha + *p.beta))));
  if (p.alpha) return std::max(1, static_cast<int>(std::floor(kInner / (1.25 * *p.alpha))));
  return static_cast<int>(std::ceil(0.625 / *p.beta));
}

// Positions jittered by up to disorder * a / 10 per axis and squared radii
// by up to disorder * a^2 / 10 around (r0 / 2)^2.
Configuration bcc_lattice(int k, double r0, double disorder, Rng& rng) {
  const double a = 1.0 / k;
  const double shift = std::max(0.1 * disorder, 1e-4) * a;
  const double w0 = 0.25 * r0 * r0;
  const double dw = std::min(0.1 * disorder * a * a, 0.5 * w0);
  Configuration c;
  auto sym = [&] { return 2.0 * rng.uniform() - 1.0; };
  auto put = [&](double x, double y, double z) {
    const double dx = shift * sym(), dy = shift * sym(), dz = shift * sym();
    const double r = std::min(r0, std::sqrt(w0 + dw * sym()));
    c.insert(wrap_to_torus({x + dx, y + dy, z + dz}), r);
  };
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      for (int l = 0; l < k; ++l) {
        put(i * a, j * a, l * a);
        put((i + 0.5) * a, (j + 0.5) * a, (l + 0.5) * a);
      }
  return c;
}

std::vector<GeneratorId> violating(const Tessellation& t, const HardcoreParams& p) {
  std::vector<GeneratorId> out;
  for (const auto& [id, cell] : t.cells)
    if (violates_hardcore(cell, p)) out.push_back(id);
  return out;
}

long violation_delta(const TessellationProposal& proposal, const HardcoreParams& p) {
  long delta = 0;
  for (const CellGeometry* c : proposal.old_cells) delta -= violates_hardcore(*c, p);
  for (const auto& u : proposal.updates)
    if (u.cell) delta += violates_hardcore(*u.cell, p);
  return delta;
}

// Deletes generators of too thin cells and splits too large or elongated
// ones by sampling a generator inside them with the owner's radius. A repair
// is kept when it does not add violations.
bool repair(LocalTessellator& engine, const HardcoreParams& p, Rng& rng, std::size_t budget) {
  std::size_t used = 0;
  engine.purge_excluded();
  while (used < budget) {
    const auto bad = violating(engine.tessellation(), p);
    if (bad.empty()) return !engine.configuration().empty();
    for (GeneratorId id : bad) {
      if (used++ >= budget) break;
      const auto& cells = engine.tessellation().cells;
      const auto it = cells.find(id);
      if (it == cells.end() || !violates_hardcore(it->second, p)) continue;
      const CellGeometry& cell = it->second;
      ConfigurationChange change;
      if (p.alpha && cell.h_min <= *p.alpha) {
        change = Delete{id};
      } else {
        const double half = 0.5 * cell.h_max;
        const double dx = half * (2.0 * rng.uniform() - 1.0);
        const double dy = half * (2.0 * rng.uniform() - 1.0);
        const double dz = half * (2.0 * rng.uniform() - 1.0);
        const Vec3 y = wrap_to_torus(cell.barycenter + Vec3{dx, dy, dz});
        change = Insert{{engine.configuration().next_id(), y, cell.radius}};
      }
      try {
        const auto proposal = engine.propose(change);
        if (violation_delta(proposal, p) <= 0) engine.commit(proposal, EmptyCellPolicy::RemoveGenerator);
      } catch (const DegenerateInput&) {
      }
    }
  }
  return false;
}

}  // namespace

Configuration initial_admissible(const EnergyModel& model, const SamplerParams& params,
                                 std::optional<std::size_t> target_n, Rng& rng) {
  model.validate();
  params.validate();
  const std::size_t n = target_n.value_or(static_cast<std::size_t>(std::llround(params.z)));
  if (n == 0) throw InitializationFailure("target cardinality is zero");
  Configuration start = binomial(n, params.r0, rng);
  if (!model.hardcore.enabled()) return start;

  LocalTessellator engine(std::move(start));
  if (repair(engine, model.hardcore, rng, 2 * n)) return engine.configuration();

  const int k = bcc_side(n, model.hardcore);
  for (double disorder = 1.0; disorder > 1e-3; disorder *= 0.5) {
    const auto lattice = build_tessellation(bcc_lattice(k, params.r0, disorder, rng));
    if (lattice.excluded_ids.empty() && violating(lattice, model.hardcore).empty()) {
      Configuration out;
      for (const auto& [id, cell] : lattice.cells) out.insert(cell.generator_position, cell.radius);
      return out;
    }
  }
  throw InitializationFailure("no configuration satisfying the hardcore constraints was found");
}

Configuration initial_nonempty(const EnergyModel& model, const SamplerParams& params, std::size_t m,
                               Rng& rng) {
  model.validate();
  params.validate();
  if (m == 0) throw InitializationFailure("greedy reconstruction needs at least one generator");
  Configuration config = binomial(m, params.r0, rng);
  const std::size_t budget = 100 * m + 1000;
  for (std::size_t used = 0;;) {
    const auto tess = build_tessellation(config);
    std::vector<GeneratorId> fix(tess.excluded_ids.begin(), tess.excluded_ids.end());
    if (model.hardcore.enabled()) {
      const auto bad = violating(tess, model.hardcore);
      fix.insert(fix.end(), bad.begin(), bad.end());
    }
    if (fix.empty()) return config;
    for (GeneratorId id : fix) {
      if (used++ >= budget) throw InitializationFailure("could not make every cell nonempty");
      Vec3 y = uniform_point(rng);
      while (config.occupied(y)) y = uniform_point(rng);
      config.move(id, y, rng.uniform_open_closed(params.r0));
    }
  }
}

// --- runs ------------------------------------------------------------------

RunResult simulate(std::shared_ptr<const EnergyModel> model, const SamplerParams& params,
                   std::uint64_t steps, Configuration initial, const RunOptions& options) {
  const Stopwatch clock;
  ChainState state(std::move(model), params, std::move(initial));
  Diagnostics d;
  const std::uint64_t every = std::max<std::uint64_t>(1, options.log_every);
  record(d, 0, state.energy(), state.configuration().size());
  for (std::uint64_t s = 1; s <= steps; ++s) {
    d.dropped_generators += state.step().dropped;
    if (s % every == 0 || s == steps) record(d, s, state.energy(), state.configuration().size());
  }
  d.counts = state.counts();
  d.steps = steps;
  d.termination = Termination::StepsCompleted;
  d.seconds = clock.seconds();
  return {state.configuration(), state.energy(), std::move(d)};
}

void EnergyWindow::push(double e) {
  const std::uint64_t i = count_++;
  while (!max_.empty() && !(max_.back().second > e)) max_.pop_back();
  while (!min_.empty() && !(min_.back().second < e)) min_.pop_back();
  max_.emplace_back(i, e);
  min_.emplace_back(i, e);
  if (count_ > t_) {
    const std::uint64_t oldest = count_ - t_;
    while (max_.front().first < oldest) max_.pop_front();
    while (min_.front().first < oldest) min_.pop_front();
  }
}

double EnergyWindow::span() const {
  if (max_.empty()) return kInf;
  const double hi = max_.front().second, lo = min_.front().second;
  if (hi == lo) return 0.0;
  return hi - lo;
}

RunResult reconstruct(std::shared_ptr<const EnergyModel> model, const SamplerParams& params,
                      const StoppingCriterion& stop, Configuration initial,
                      const RunOptions& options) {
  stop.validate();
  if (model->reconstructing.empty())
    throw InvalidParameter("reconstruction needs at least one reconstructing potential");
  const Stopwatch clock;
  ChainState state(std::move(model), params, std::move(initial));
  Diagnostics d;
  const std::uint64_t every = std::max<std::uint64_t>(1, options.log_every);
  EnergyWindow window(stop.t);
  record(d, 0, state.energy(), state.configuration().size());
  d.termination = Termination::CapReached;
  std::uint64_t s = 0;
  while (s < stop.max_steps) {
    ++s;
    d.dropped_generators += state.step().dropped;
    window.push(state.energy().total);
    if (s % every == 0) record(d, s, state.energy(), state.configuration().size());
    if (window.full() && window.span() < stop.delta) {
      d.termination = Termination::Converged;
      break;
    }
  }
  record(d, s, state.energy(), state.configuration().size());
  d.counts = state.counts();
  d.steps = s;
  d.seconds = clock.seconds();
  return {state.configuration(), state.energy(), std::move(d)};
}

RunResult greedy_reconstruct(std::shared_ptr<const EnergyModel> model, const SamplerParams& params,
                             const GreedyParams& greedy, Configuration initial,
                             const RunOptions& options) {
  params.validate();
  model->validate();
  if (greedy.quiet_limit == 0 || greedy.proposal_budget == 0)
    throw InvalidParameter("greedy limits must be positive");
  const Stopwatch clock;
  Rng rng(params.seed);
  LocalTessellator engine(std::move(initial));
  const std::size_t m = engine.configuration().size();
  if (m == 0 || !engine.tessellation().excluded_ids.empty())
    throw InvalidParameter("greedy reconstruction needs a start with only nonempty cells");
  EnergyAccumulator acc(*model, engine.tessellation());
  EnergyBreakdown energy = acc.breakdown();
  if (!energy.hardcore_finite) throw InvalidParameter("greedy start violates the hardcore constraints");

  Diagnostics d;
  const std::uint64_t every = std::max<std::uint64_t>(1, options.log_every);
  record(d, 0, energy, m);
  std::uint64_t quiet = 0, it = 0;
  const auto k = static_cast<std::size_t>(ProposalKind::Move);
  d.termination = Termination::CapReached;
  while (it < greedy.max_iterations) {
    ++it;
    const GeneratorId id = engine.configuration().by_index(rng.index(m)).id;
    std::optional<ProposalEnergy> next;
    for (std::uint64_t draw = 0; !next; ++draw) {
      if (draw == greedy.proposal_budget)
        throw RejectionBudgetExhausted("no replacement with a nonempty cell was found");
      const Vec3 y = uniform_point(rng);
      const double r = rng.uniform_open_closed(params.r0);
      try {
        auto proposal = engine.propose(Move{id, y, r}, {}, true);
        if (proposal.vetoed) continue;
        next.emplace(ProposalEnergy{std::move(proposal), acc, {}});
        next->accumulator.apply(next->proposal);
        next->breakdown = next->accumulator.breakdown();
      } catch (const DegenerateInput&) {
      }
    }
    ++d.counts.proposed[k];
    if (next->breakdown.total < energy.total) {
      engine.commit(next->proposal, EmptyCellPolicy::KeepGenerator);
      acc = std::move(next->accumulator);
      energy = std::move(next->breakdown);
      ++d.counts.accepted[k];
      quiet = 0;
      if (d.counts.accepted[k] % params.reanchor_every == 0) {
        acc = EnergyAccumulator(*model, engine.tessellation());
        energy = acc.breakdown();
      }
    } else if (++quiet >= greedy.quiet_limit) {
      d.termination = Termination::Quiet;
      break;
    }
    if (it % every == 0) record(d, it, energy, m);
  }
  record(d, it, energy, m);
  d.steps = it;
  d.seconds = clock.seconds();
  return {engine.configuration(), energy, std::move(d)};
}

void write_acceptance_csv(std::ostream& out, const AcceptanceCounts& counts) {
  out << "kind,proposed,accepted,rate\n";
  for (std::size_t k = 0; k < 3; ++k) {
    const double rate = counts.proposed[k] ? static_cast<double>(counts.accepted[k]) /
                                                 static_cast<double>(counts.proposed[k])
                                           : 0.0;
    out << to_string(static_cast<ProposalKind>(k)) << ',' << counts.proposed[k] << ','
        << counts.accepted[k] << ',' << rate << '\n';
  }
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  write_trace_header(out, trace.empty() ? 0 : trace.front().energy.reconstructing_terms.size());
  for (const auto& row : trace) write_trace_row(out, row.step, row.energy, row.n_cells);
}

}  // namespace glt
