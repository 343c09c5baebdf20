#include "glt/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "glt/errors.hpp"

namespace glt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double functional_value(const ReconstructingPotentialSpec& spec, double count, double sum,
                        double sum_sq, const Histogram& hist) {
  switch (spec.functional) {
    case Functional::Mean: {
      if (count < 1) throw InsufficientData("mean of an empty sample");
      return std::sqrt(std::abs(sum / count - spec.target_value));
    }
    case Functional::Variance: {
      if (count < 2) throw InsufficientData("variance needs at least two values");
      const double var = std::max(0.0, (sum_sq - sum * sum / count) / (count - 1));
      return std::sqrt(std::abs(var - spec.target_value));
    }
    case Functional::Discrepancy:
      return std::sqrt(discrepancy(hist, spec.target));
  }
  throw InvalidParameter("unknown functional");
}

void finish_total(EnergyBreakdown& e) {
  double total = e.pair_term;
  for (double t : e.reconstructing_terms) total += t;
  e.total = e.hardcore_finite ? total : kInf;
}

// Weighted term, with +inf for a functional that cannot be evaluated yet.
template <class F>
void push_term(EnergyBreakdown& e, double theta, F&& value) {
  double v;
  try {
    v = value();
  } catch (const InsufficientData&) {
    v = kInf;
  } catch (const EmptyHistogram&) {
    v = kInf;
  }
  e.reconstructing_values.push_back(v);
  e.reconstructing_terms.push_back(theta == 0.0 ? 0.0 : theta * v);
}

}  // namespace

void HardcoreParams::validate() const {
  if (alpha && !(*alpha > 0.0)) throw InvalidParameter("hardcore alpha must be > 0");
  if (beta && !(*beta > 0.0)) throw InvalidParameter("hardcore beta must be > 0");
  if (alpha && beta && !(*alpha < *beta)) throw InvalidParameter("hardcore needs alpha < beta");
  if (shape_bound && !(*shape_bound > 0.0)) throw InvalidParameter("hardcore B must be > 0");
}

std::string_view to_string(Functional f) {
  switch (f) {
    case Functional::Mean: return "mean";
    case Functional::Variance: return "variance";
    case Functional::Discrepancy: return "dsc";
  }
  return "?";
}

Functional parse_functional(std::string_view name) {
  if (name == "mean") return Functional::Mean;
  if (name == "variance") return Functional::Variance;
  if (name == "dsc") return Functional::Discrepancy;
  throw ConfigError("unknown functional '" + std::string(name) + "'");
}

void ReconstructingPotentialSpec::validate() const {
  if (!std::isfinite(theta)) throw InvalidParameter("reconstructing theta must be finite");
  if (functional == Functional::Discrepancy) {
    if (target.breaks.size() < 2) throw EmptyBreaks("discrepancy target has no bins");
    if (target.counts.size() + 1 != target.breaks.size())
      throw BinMismatch("discrepancy target counts do not match its breaks");
    if (!(target.total() > 0.0)) throw EmptyHistogram("discrepancy target is empty");
  } else if (!std::isfinite(target_value)) {
    throw InvalidParameter("reconstructing target value must be finite");
  }
}

void EnergyModel::validate() const {
  hardcore.validate();
  if (pair && !(pair->cap > 0.0)) throw InvalidParameter("NVR cap must be > 0");
  if (pair && !std::isfinite(pair->theta)) throw InvalidParameter("pair theta must be finite");
  for (const auto& r : reconstructing) r.validate();
}

bool EnergyBreakdown::admissible() const { return hardcore_finite; }

bool violates_hardcore(const CellGeometry& cell, const HardcoreParams& p) {
  if (p.alpha && cell.h_min <= *p.alpha) return true;
  if (p.beta && cell.h_max >= *p.beta) return true;
  if (p.shape_bound && cell.h_max * cell.h_max * cell.h_max >= *p.shape_bound * cell.volume)
    return true;
  return false;
}

bool violates_hardcore_robustly(const CellGeometry& cell, const HardcoreParams& p,
                                double min_face_area) {
  if (!violates_hardcore(cell, p) || !(cell.reach < 0.5)) return false;
  const Vec3 bary = torus_displacement(cell.generator_position, cell.barycenter);
  double h_min = std::numeric_limits<double>::infinity(), h_max = 0.0;
  for (const auto& f : cell.faces) {
    if (f.area < min_face_area) continue;
    const double h = f.offset - dot(f.normal, bary);
    h_min = std::min(h_min, h);
    h_max = std::max(h_max, h);
  }
  CellGeometry core;
  core.volume = cell.volume;
  core.h_min = h_min;
  core.h_max = h_max;
  return violates_hardcore(core, p);
}

double v1_hard(const CellGeometry& cell, const HardcoreParams& p) {
  return violates_hardcore(cell, p) ? kInf : 0.0;
}

double v2_nvr(double v1, double v2, double cap) {
  return std::min(nvr(v1, v2), cap);
}

double vn_reconstructing(const ReconstructingPotentialSpec& spec, const Tessellation& tess) {
  const auto values = extract(spec.kind, tess);
  switch (spec.functional) {
    case Functional::Mean:
      return std::sqrt(std::abs(sample_mean(values) - spec.target_value));
    case Functional::Variance:
      return std::sqrt(std::abs(sample_variance(values) - spec.target_value));
    case Functional::Discrepancy:
      return std::sqrt(discrepancy(histogram(values, spec.target.breaks), spec.target));
  }
  throw InvalidParameter("unknown functional");
}

EnergyBreakdown total_energy(const EnergyModel& model, const Tessellation& tess) {
  EnergyBreakdown e;
  if (model.hardcore.enabled()) {
    for (const auto& [id, cell] : tess.cells)
      if (violates_hardcore(cell, model.hardcore)) ++e.hardcore_violations;
  }
  e.hardcore_finite = e.hardcore_violations == 0;
  if (model.pair) {
    for (const auto& [a, b] : tess.neighbor_pairs)
      e.pair_sum += v2_nvr(tess.cell(a).volume, tess.cell(b).volume, model.pair->cap);
    e.pair_term = model.pair->theta * e.pair_sum;
  }
  for (const auto& spec : model.reconstructing)
    push_term(e, spec.theta, [&] { return vn_reconstructing(spec, tess); });
  finish_total(e);
  return e;
}

EnergyAccumulator::EnergyAccumulator(const EnergyModel& model, const Tessellation& tess)
    : model_(&model) {
  terms_.resize(model.reconstructing.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const auto& spec = model.reconstructing[i];
    if (spec.functional == Functional::Discrepancy) {
      terms_[i].hist.breaks = spec.target.breaks;
      terms_[i].hist.counts.assign(spec.target.bins(), 0.0);
    }
  }
  for (const auto& [id, cell] : tess.cells) add_cell(cell, +1);
  for (const auto& [a, b] : tess.neighbor_pairs) add_pair(tess.cell(a).volume, tess.cell(b).volume, +1);
}

void EnergyAccumulator::add_value(std::size_t term, double v, int sign) {
  Aggregate& agg = terms_[term];
  agg.count += sign;
  if (model_->reconstructing[term].functional == Functional::Discrepancy) {
    bool clamped = false;
    agg.hist.counts[agg.hist.bin_of(v, &clamped)] += sign;
    if (clamped) agg.clamped += sign;
  } else {
    agg.sum += sign * v;
    agg.sum_sq += sign * v * v;
  }
}

void EnergyAccumulator::add_cell(const CellGeometry& cell, int sign) {
  cells_ = static_cast<std::size_t>(static_cast<long>(cells_) + sign);
  if (model_->hardcore.enabled() && violates_hardcore(cell, model_->hardcore)) violations_ += sign;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const auto kind = model_->reconstructing[i].kind;
    if (arity(kind) == 1) add_value(i, cell_value(kind, cell), sign);
  }
}

void EnergyAccumulator::add_pair(double volume_a, double volume_b, int sign) {
  if (model_->pair) pair_sum_ += sign * v2_nvr(volume_a, volume_b, model_->pair->cap);
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const auto kind = model_->reconstructing[i].kind;
    if (arity(kind) == 2) add_value(i, pair_value(kind, volume_a, volume_b), sign);
  }
}

void EnergyAccumulator::apply(const TessellationProposal& proposal) {
  for (const auto& p : proposal.pairs_removed) add_pair(p.volume_a, p.volume_b, -1);
  for (const CellGeometry* cell : proposal.old_cells) add_cell(*cell, -1);
  for (const auto& u : proposal.updates)
    if (u.cell) add_cell(*u.cell, +1);
  for (const auto& p : proposal.pairs_added) add_pair(p.volume_a, p.volume_b, +1);
}

EnergyBreakdown EnergyAccumulator::breakdown() const {
  EnergyBreakdown e;
  e.hardcore_violations = static_cast<std::size_t>(std::max(0L, violations_));
  e.hardcore_finite = e.hardcore_violations == 0;
  if (model_ && model_->pair) {
    e.pair_sum = pair_sum_;
    e.pair_term = model_->pair->theta * pair_sum_;
  }
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const auto& spec = model_->reconstructing[i];
    const auto& agg = terms_[i];
    push_term(e, spec.theta,
              [&] { return functional_value(spec, agg.count, agg.sum, agg.sum_sq, agg.hist); });
  }
  finish_total(e);
  return e;
}

std::vector<long> EnergyAccumulator::clamped() const {
  std::vector<long> out;
  for (const auto& t : terms_) out.push_back(t.clamped);
  return out;
}

ProposalEnergy energy_delta(const EnergyModel& model, const LocalTessellator& engine,
                            const EnergyAccumulator& current, const ConfigurationChange& change,
                            bool early_reject) {
  if (current.model() != &model) throw InvalidParameter("accumulator belongs to another model");
  if (early_reject && model.hardcore.enabled()) {
    const double min_area = engine.tolerances().asymmetric_face_area;
    auto veto = [&](const CellGeometry& c) {
      return violates_hardcore_robustly(c, model.hardcore, min_area);
    };
    auto proposal = engine.propose(change, veto);
    if (proposal.vetoed) {
      ProposalEnergy out{std::move(proposal), current, current.breakdown()};
      out.breakdown.hardcore_finite = false;
      out.breakdown.hardcore_violations = std::max<std::size_t>(1, out.breakdown.hardcore_violations);
      out.breakdown.total = kInf;
      return out;
    }
    ProposalEnergy out{std::move(proposal), current, {}};
    out.accumulator.apply(out.proposal);
    out.breakdown = out.accumulator.breakdown();
    return out;
  }
  ProposalEnergy out{engine.propose(change), current, {}};
  out.accumulator.apply(out.proposal);
  out.breakdown = out.accumulator.breakdown();
  return out;
}

void write_trace_header(std::ostream& out, std::size_t reconstructing_terms) {
  out << "step,total,hardcore_violations,pair_term";
  for (std::size_t i = 1; i <= reconstructing_terms; ++i) out << ",recon_term_" << i;
  out << ",n_cells\n";
}

void write_trace_row(std::ostream& out, std::uint64_t step, const EnergyBreakdown& e,
                     std::size_t n_cells) {
  const auto old = out.precision(17);
  out << step << ',' << e.total << ',' << e.hardcore_violations << ',' << e.pair_term;
  for (double t : e.reconstructing_terms) out << ',' << t;
  out << ',' << n_cells << '\n';
  out.precision(old);
}

}  // namespace glt
