#pragma once

#include "cqa/case.hpp"
#include "cqa/cqkit.hpp"
#include "cqa/powerflow.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cqa {

enum class PerturbationKind { Load, Shunt, Line, Mixed };
enum class BusCoverage { None, Load, Shunt };

std::string to_string(PerturbationKind k);
PerturbationKind perturbation_kind_from_string(const std::string& s);

/// Default sampling box: nominal +/- rel * max(|nominal|, floor) per parameter.
struct BoxSpec {
  double rel = 0.1;
  double floor = 1.0;
};

/// A parametrization of the power-flow equations by xi in an open box.
///
/// Parameter layouts:
///   Load   xi = [p^L; q^L]                                    (2N)
///   Shunt  xi = [g~^sh; b~^sh], lumped nodal shunts            (2N)
///   Mixed  per covered bus either (p^L, q^L) or (g~^sh, b~^sh),
///          first components of all covered buses, then second  (2K)
///   Line   xi = [g_series; b_series] of every line             (2M)
class PerturbationModel {
 public:
  static PerturbationModel load(const Network& net, BoxSpec box = {});
  static PerturbationModel shunt(const Network& net, BoxSpec box = {});
  static PerturbationModel line(const Network& net, BoxSpec box = {});
  static PerturbationModel mixed(const Network& net, std::vector<BusCoverage> coverage, BoxSpec box = {});

  /// Replaces the sampling box. Every interval must have positive width.
  PerturbationModel with_box(Vec lower, Vec upper) const;

  PerturbationKind kind() const { return kind_; }
  int dimension() const { return static_cast<int>(lower_.size()); }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  const std::vector<BusCoverage>& coverage() const { return coverage_; }
  /// Buses with a load or shunt parameter, in bus order (empty for Line).
  const std::vector<int>& covered_buses() const { return covered_; }

  Vec nominal(const Network& net) const;
  Network apply(const Network& net, const Vec& xi) const;
  std::string parameter_label(int i) const;

 private:
  PerturbationModel(PerturbationKind kind, int n_buses, int n_lines, std::vector<BusCoverage> coverage);
  void set_default_box(const Network& net, BoxSpec box);

  PerturbationKind kind_;
  int n_buses_ = 0;
  int n_lines_ = 0;
  std::vector<BusCoverage> coverage_;
  std::vector<int> covered_;
  Vec lower_;
  Vec upper_;
};

/// dF/dxi, 2N x k, at state x of network net (the network before or after
/// applying xi; the derivative does not depend on xi itself).
Mat param_jacobian(const PerturbationModel& model, const Network& net, const SystemState& x);

struct RankHypothesis {
  int rank = 0;
  int required = 0;
  bool satisfied = false;
  double sigma_min = 0.0;
  // Shunt-carrying models only: every shunt-covered bus has v > 0.
  std::optional<bool> voltage_premise;
  double min_v = 0.0;
};

RankHypothesis check_rank_hypothesis(const PerturbationModel& model, const Network& net, const SystemState& x,
                                     double ulp_scale = kDefaultUlpScale);

/// Counter-based seeding: a pure function of (seed, trial).
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial);

/// Uniform draw from the open box, deterministic in `seed`.
Vec sample_box(const Vec& lower, const Vec& upper, std::uint64_t seed);

struct ExperimentOptions {
  Tolerances tol;
  NewtonOptions newton;
  int threads = 1;
  bool keep_states = false;  // keep every trial's operating point (failures always keep theirs)
};

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  Vec xi;
  bool converged = false;
  bool feasible = false;
  bool licq = false;
  int rank = 0;
  int rows = 0;
  double sigma_min = 0.0;
  bool hypothesis_satisfied = false;
  int newton_iterations = 0;
  std::string note;
  std::optional<SystemState> state;
};

struct LicqFailure {
  int trial = 0;
  std::uint64_t seed = 0;
  Vec xi;
  SystemState state;
  CQReport report;
};

struct GenericityReport {
  std::string case_name;
  PerturbationKind model = PerturbationKind::Load;
  int dimension = 0;
  Vec box_lower;
  Vec box_upper;
  std::uint64_t rng_seed = 0;
  int trials = 0;
  int converged_count = 0;
  int feasible_count = 0;
  int licq_pass_count = 0;
  std::vector<double> sigma_min_samples;  // feasible trials, ascending
  std::vector<LicqFailure> failures;
  std::vector<TrialRecord> records;
  // Rank hypothesis dF/dxi has rank 2N, at the nominal operating point and at every feasible trial.
  std::optional<RankHypothesis> nominal_hypothesis;
  int hypothesis_failures = 0;
  bool within_hypotheses = true;
  // Assumption on the fixed (operational) constraints at the nominal operating point.
  std::optional<FixedLicqResult> nominal_fixed_licq;
  Tolerances tol;
  std::string scope;
};

/// Monte Carlo corroboration of generic LICQ: per trial, draw xi, apply it,
/// solve the power flow from the case setpoints and run licq_check if the
/// point is feasible. Deterministic in (case, model, trials, seed).
GenericityReport run_genericity_experiment(const Case& c, const PerturbationModel& model, int trials,
                                           std::uint64_t seed, const ExperimentOptions& opts = {});

struct RestoreResult {
  SystemState state;
  int iterations = 0;
  bool kept_active_set = false;
};

/// Moves `reference` onto the feasible set of `cs` by minimum-norm Newton
/// steps on F, h and the inequalities in `keep_active` held as equalities.
/// At a fold (active stack rank-deficient by one) the first step follows the
/// second-order model along the degenerate direction. If no solution keeps
/// the active set, the inequalities are released. Throws InfeasibleError when
/// no feasible point is reached.
RestoreResult restore_feasibility(const ConstraintSystem& cs, const SystemState& reference,
                                  const std::vector<int>& keep_active, int max_iter = 100);

struct ProbeRow {
  double delta = 0.0;
  bool solved = false;
  double sigma_min = 0.0;
  bool licq_holds = false;
  int rank = 0;
  int rows = 0;
  std::string error;
  std::optional<SystemState> state;
};

/// Perturbs load parameter `param_index` (layout [p^L; q^L]) by each delta,
/// restores feasibility starting from `reference` and reports the degeneracy margin.
std::vector<ProbeRow> tangency_escape_probe(const Case& c, const SystemState& reference,
                                            std::span<const double> deltas, int param_index,
                                            const Tolerances& tol = {});

}  // namespace cqa
