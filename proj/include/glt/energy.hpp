#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <cstdint>
#include <vector>

#include "glt/characteristics.hpp"
#include "glt/geometry.hpp"
#include "glt/local_tessellator.hpp"

namespace glt {

/// First-order hardcore constraints; a disabled bound is nullopt.
struct HardcoreParams {
  std::optional<double> alpha;        // h_min <= alpha is forbidden
  std::optional<double> beta;         // h_max >= beta is forbidden
  std::optional<double> shape_bound;  // h_max^3 >= B |C| is forbidden

  bool enabled() const { return alpha || beta || shape_bound; }
  void validate() const;  // throws InvalidParameter
};

/// theta * sum over neighbor pairs of min(nvr, cap).
struct PairPotentialSpec {
  double theta = 0.0;
  double cap = 100.0;
};

enum class Functional { Mean, Variance, Discrepancy };

std::string_view to_string(Functional f);
Functional parse_functional(std::string_view name);  // "mean", "variance", "dsc"

/// theta * |T(s) - s0|^(1/2), or theta * dsc(H_s, H')^(1/2).
struct ReconstructingPotentialSpec {
  CharacteristicKind kind = CharacteristicKind::Nof;
  Functional functional = Functional::Mean;
  double target_value = 0.0;  // s0 for mean and variance
  Histogram target;           // H' for the discrepancy
  double theta = 0.0;

  void validate() const;
};

struct EnergyModel {
  HardcoreParams hardcore;
  std::optional<PairPotentialSpec> pair;
  std::vector<ReconstructingPotentialSpec> reconstructing;

  /// E = 0 for every configuration.
  bool is_null() const { return !hardcore.enabled() && !pair && reconstructing.empty(); }
  void validate() const;
};

struct EnergyBreakdown {
  bool hardcore_finite = true;
  std::size_t hardcore_violations = 0;  // cells violating a hardcore bound
  double pair_sum = 0.0;                // sum of capped NVR, unweighted
  double pair_term = 0.0;               // theta2 * pair_sum
  std::vector<double> reconstructing_values;  // unweighted potential values
  std::vector<double> reconstructing_terms;   // theta-weighted
  double total = 0.0;                         // +inf when inadmissible

  bool admissible() const;
};

/// 0 or +inf.
double v1_hard(const CellGeometry& cell, const HardcoreParams& p);
bool violates_hardcore(const CellGeometry& cell, const HardcoreParams& p);

/// Violation that persists when faces below `min_face_area` are ignored, so
/// dropping sliver faces cannot lift it. False for cells reaching half a
/// period or more.
bool violates_hardcore_robustly(const CellGeometry& cell, const HardcoreParams& p,
                                double min_face_area);

/// min(nvr(v1, v2), cap).
double v2_nvr(double v1, double v2, double cap);

/// Unweighted reconstructing potential over the whole tessellation. Throws
/// InsufficientData (too few values) or EmptyHistogram.
double vn_reconstructing(const ReconstructingPotentialSpec& spec, const Tessellation& tess);

/// Every term recomputed from the tessellation. Reconstructing terms that
/// cannot be evaluated (too few cells) count as +inf.
EnergyBreakdown total_energy(const EnergyModel& model, const Tessellation& tess);

/// Running aggregates from which the energy of a tessellation can be read
/// in time independent of its size: violation count, capped-NVR sum, and per
/// reconstructing potential either (count, sum, sum of squares) or bin
/// counts. Cells and pairs can be added and withdrawn.
class EnergyAccumulator {
 public:
  EnergyAccumulator() = default;
  EnergyAccumulator(const EnergyModel& model, const Tessellation& tess);

  void add_cell(const CellGeometry& cell, int sign);
  void add_pair(double volume_a, double volume_b, int sign);

  /// Move from the state before the proposal to the state after it.
  void apply(const TessellationProposal& proposal);

  EnergyBreakdown breakdown() const;

  const EnergyModel* model() const { return model_; }
  std::size_t cells() const { return cells_; }
  /// Values currently folded into an end bin, per reconstructing potential.
  std::vector<long> clamped() const;

 private:
  struct Aggregate {
    double count = 0.0;
    double sum = 0.0;
    double sum_sq = 0.0;
    Histogram hist;
    long clamped = 0;
  };
  void add_value(std::size_t term, double v, int sign);

  const EnergyModel* model_ = nullptr;
  std::size_t cells_ = 0;
  long violations_ = 0;
  double pair_sum_ = 0.0;
  std::vector<Aggregate> terms_;
};

/// Energy of the configuration with `change` applied, computed from the
/// local proposal and a copy of the aggregates. The engine is not modified;
/// committing the proposal and adopting `accumulator` realizes the change.
struct ProposalEnergy {
  TessellationProposal proposal;
  EnergyAccumulator accumulator;
  EnergyBreakdown breakdown;
};
/// With `early_reject`, the tessellation proposal stops at the first cell
/// that violates the hardcore; the result then has proposal.vetoed set and an
/// infinite total.
ProposalEnergy energy_delta(const EnergyModel& model, const LocalTessellator& engine,
                            const EnergyAccumulator& current, const ConfigurationChange& change,
                            bool early_reject = false);

/// Trace CSV: step,total,hardcore_violations,pair_term,recon_term_1..k,n_cells
void write_trace_header(std::ostream& out, std::size_t reconstructing_terms);
void write_trace_row(std::ostream& out, std::uint64_t step, const EnergyBreakdown& e,
                     std::size_t n_cells);

}  // namespace glt
