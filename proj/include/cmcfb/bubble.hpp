#pragma once

#include <cstdint>
#include <vector>

#include "cmcfb/disk_map.hpp"
#include "cmcfb/types.hpp"

namespace cmc {

/// Complex polynomial, coefficient i multiplies w^i.
using Poly = std::vector<Complex>;

Complex poly_eval(const Poly& p, Complex w);
Poly poly_derivative(const Poly& p);
/// Drops leading coefficients with |c| <= tol.
Poly poly_trim(const Poly& p, double tol = 0.0);
int poly_degree(const Poly& p, double tol = 0.0);
/// Sylvester resultant of two trimmed polynomials.
Complex resultant(const Poly& p, const Poly& q);

/// Rotation whose columns are the tangent frame (t1, t2) at `pole` and the
/// pole itself; it carries the north pole e3 to `pole`.
Mat3 pole_frame(const Vec3& pole);

/// Stereographic projection from `pole`. Throws PoleInput at the pole.
Complex stereographic(const Vec3& p, const Vec3& pole = Vec3::UnitZ());
/// Inverse stereographic projection; |z| > 1e8 returns the pole itself and
/// sets *saturated.
Vec3 inv_stereographic(Complex z, const Vec3& pole = Vec3::UnitZ(), bool* saturated = nullptr);

enum class BubbleKind { plane, half_plane };
std::string to_string(BubbleKind k);

/// omega(z) = pi_pole^{-1}(P(w) / Q(w)) + shift with w = (z - center) / scale.
/// Plane bubbles are parametrized over C; half-plane bubbles live on the
/// unit disk, and their energy is taken over D.
struct RationalBubble {
  Vec3 pole = Vec3::UnitZ();
  Poly p = {0.0, 1.0};
  Poly q = {1.0};
  Vec3 shift = Vec3::Zero();
  Vec2 center = Vec2::Zero();
  double scale = 1.0;
  BubbleKind kind = BubbleKind::plane;

  /// Throws InvalidArgument on a zero fraction, non-unit pole or scale <= 0.
  void validate() const;
};

Vec3 eval_bubble(const RationalBubble& b, Complex z);
/// |grad omega|(z) = 2 sqrt 2 |P'Q - Q'P| / (|P|^2 + |Q|^2) / scale.
double bubble_gradient_norm(const RationalBubble& b, Complex z);

struct BubbleEnergy {
  double energy = 0.0;
  int degree = 0;
};

/// Dirichlet energy by adaptive Gauss-Legendre quadrature: over the plane for
/// plane bubbles, over the unit disk for half-plane bubbles. Throws
/// ReducibleFraction when |Res(P, Q)| <= 1e-10 * scale^(deg P + deg Q).
BubbleEnergy bubble_energy(const RationalBubble& b);

struct SimplicityCheck {
  bool simple = false;
  /// Set when a common factor was divided out.
  bool reduced = false;
  int degree = 0;
  Poly p;
  Poly q;
};

SimplicityCheck is_simple(const RationalBubble& b);

/// phi(z) = -i (z + 1) / (z - 1), a conformal map D \ {1} -> upper half-plane.
Complex disk_to_half_plane(Complex z);
/// Inverse of disk_to_half_plane: w -> (w - i) / (w + i).
Complex half_plane_to_disk(Complex w);

/// Canonical degree-1 sphere: shift + rotation * pi^{-1}((z - a) / scale).
RationalBubble plane_bubble(const Vec2& a, double scale, const Mat3& rotation = Mat3::Identity(),
                            const Vec3& shift = Vec3::Zero());

/// Canonical degree-1 hemisphere on D concentrating at the boundary point
/// b (|b| = 1): the center is a = (1 - scale) b and the map is
/// shift + rotation * pi^{-1}(1 / g(z)) with g the disk automorphism sending
/// a to 0. With rotation = I the image is the upper unit hemisphere and the
/// trace is the unit circle around shift.
RationalBubble half_plane_bubble(double boundary_angle, double scale,
                                 const Mat3& rotation = Mat3::Identity(),
                                 const Vec3& shift = Vec3::Zero());

/// Hemisphere whose boundary circle is centered at (center_2d, 0), tilted by
/// `tilt` about that center.
RationalBubble hemisphere_bubble(const Vec2& center_2d, double scale,
                                 const Mat3& tilt = Mat3::Identity(),
                                 double boundary_angle = 0.0);

struct PlantedBubble {
  BubbleKind kind = BubbleKind::plane;
  /// Center for plane bubbles.
  Vec2 center = Vec2::Zero();
  /// Boundary direction for half-plane bubbles.
  double boundary_angle = 0.0;
  /// scale = scale0 * eps^scale_power.
  double scale0 = 1.0;
  double scale_power = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 shift = Vec3::Zero();

  RationalBubble realize(double eps) const;
};

struct SyntheticSequence {
  std::vector<PlantedBubble> bubbles;
  std::vector<double> epsilon_schedule;
  double noise_amp = 0.0;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument unless the schedule is strictly decreasing and
  /// positive and noise_amp >= 0.
  void validate() const;
};

struct SynthResult {
  DiskMap map;
  std::vector<RationalBubble> truth;
};

/// Sum of the planted bubbles at eps plus a seeded harmonic-polynomial
/// noise whose gradient is bounded by noise_amp.
SynthResult synth_sequence(const SyntheticSequence& s, double eps, int n_r, int n_theta,
                           double H_target = 1.0);

}  // namespace cmc
