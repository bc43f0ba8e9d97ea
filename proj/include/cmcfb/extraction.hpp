#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmcfb/bubble.hpp"
#include "cmcfb/disk_map.hpp"

namespace cmc {

/// Empirical trilinear constant used when no sweep estimate is supplied
/// (max C_estimate of the default 200-instance sweep at 128 x 128, rounded up).
inline constexpr double kDefaultTrilinearC0 = 0.014;

struct ExtractionConfig {
  int max_bubbles = 8;
  /// Absolute stopping threshold for the weighted statistic; when <= 0 it
  /// is weighted_sup_rel times the statistic of the input map.
  double weighted_sup_tol = 0.0;
  double weighted_sup_rel = 0.05;
  double separation_min = 20.0;
  double concentration_nu = 0.5;
  /// Fit window radius as a multiple of the candidate scale.
  double fit_window = 10.0;
  /// Classification threshold on (1 - |a|) / lambda.
  double domain_cut = 10.0;
  int restarts = 5;
  std::uint64_t seed = 0;
  double trilinear_c0 = kDefaultTrilinearC0;

  /// Throws InvalidArgument on nonpositive tolerances or when
  /// concentration_nu >= 1 / (2 C0).
  void validate() const;
};

struct FittedBubble {
  RationalBubble bubble;
  double relative_residual = 0.0;
  /// Closed-form energy of the fitted model (8 pi or 4 pi for degree 1).
  double model_energy = 0.0;
  /// Energy of the model sampled on the input grid, i.e. inside D.
  double disk_energy = 0.0;
  int covering_degree = 1;
};

struct BubbleDecomposition {
  std::vector<FittedBubble> bubbles;
  double total_energy = 0.0;
  double residual_energy = 0.0;
  std::vector<double> residual_history;
  double weighted_sup = 0.0;
  double initial_weighted_sup = 0.0;
  double threshold = 0.0;
  std::vector<std::vector<double>> pairwise_separation;
  double coverage_gap = 0.0;
  int hemisphere_count = 0;
  /// floor(total_energy / 4 pi + 0.005).
  int energy_budget = 0;
  std::string stop_reason;
  std::vector<std::string> flags;
};

/// u - sum of the bubbles evaluated at the grid nodes.
DiskMap residual_map(const DiskMap& u, const std::vector<RationalBubble>& bubbles);

/// d_i(x) = sqrt(lambda_i^2 + |a_i - x|^2).
double concentration_distance(const RationalBubble& b, const Vec2& x);

struct StatisticResult {
  double value = 0.0;
  int node = 0;
  Vec2 point = Vec2::Zero();
  double gradient_norm = 0.0;
  /// Statistic at every node.
  std::vector<double> field;
};

/// max over nodes of min_i d_i(z) |grad(u - sum omega_i)(z)|; the empty
/// minimum is 1 and ties go to the lowest node index.
StatisticResult weighted_sup_statistic(const DiskMap& u, const std::vector<RationalBubble>& bubbles);

struct Candidate {
  Vec2 a = Vec2::Zero();
  double lambda = 0.0;
  double statistic = 0.0;
};

/// Argmax of the statistic and lambda = 1 / |grad R| there. Throws
/// BelowThreshold if the statistic is below tol.
Candidate next_candidate(const DiskMap& u, const std::vector<RationalBubble>& bubbles, double tol);

/// half_plane iff (1 - |a|) / lambda < domain_cut.
BubbleKind classify_limit_domain(const Vec2& a, double lambda, double domain_cut = 10.0);

struct FitResult {
  RationalBubble bubble;
  double relative_residual = 0.0;
  int window_nodes = 0;
};

/// Degree-1 least-squares fit of the bubble family `kind` to u in the window
/// of radius cfg.fit_window * lambda around a. Throws FitDiverged when the
/// relative residual exceeds 0.2.
FitResult fit_bubble(const DiskMap& u, const Vec2& a, double lambda, BubbleKind kind,
                     const ExtractionConfig& cfg);

/// d_i(a_j) / lambda_j + d_j(a_i) / lambda_i.
double separation_statistic(const RationalBubble& bi, const RationalBubble& bj);

/// sup over grid centers of the residual energy in B(z, t).
double concentration_function(const DiskMap& residual, double t);

/// Bubble extraction loop. Throws BudgetExceeded if the fitted bubbles claim
/// more than 1.05 times the energy present.
BubbleDecomposition extract(const DiskMap& u, const ExtractionConfig& cfg);

/// Largest distance from the image samples of u to the union of the bubble
/// images, each translated by the other bubbles' values at its center. With
/// no bubbles the declared set is the image centroid.
double coverage_gap(const DiskMap& u, const std::vector<RationalBubble>& bubbles);

}  // namespace cmc
