#pragma once

#include "nashbsde/game_model.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace nashbsde {

/// Parameters of the approximating generators H_i^n.
///
/// The convolution is evaluated on the fixed lattice (h Z)^{2m} with spacing
/// h = 2 * mollifier_radius / (n * quad_points), i.e. about quad_points nodes
/// per axis across the kernel support. Kernel weights are renormalized to sum
/// to one at every evaluation point.
struct MollifyParams {
    int n = 8;
    int quad_points = 6;
    double mollifier_radius = 1.0;

    void validate() const;
};

/// Componentwise clamp of x to [-n, n].
Vector truncate_state(const Vector& x, int n);

/// C-infinity step, 0 for tau <= 0, 1 for tau >= 1, built from exp(-1/tau).
double smooth_step(double tau) noexcept;

/// Unnormalized bump exp(-1/(1 - r2)) for r2 < 1, 0 otherwise.
double bump(double r2) noexcept;

/// psi(y/n, z/n): 1 when |y|^2 + |z|^2 <= n^2, 0 when >= 4 n^2, smooth and
/// monotone in the radius between.
double cutoff(const Vector& y, const Vector& z, int n);

/// Both players' mollified generators at one point (they share the selector
/// evaluations on the lattice).
std::array<double, 2> mollified_generators(const GameSpec& spec, double t, const Vector& x,
                                           const Vector& z1, const Vector& z2,
                                           const MollifyParams& params);

double mollified_generator(const GameSpec& spec, Player player, double t, const Vector& x,
                           const Vector& z1, const Vector& z2, const MollifyParams& params);

/// Unmollified coupled generator H_i(t, x, z^i, u*(t,x,z1,z2), v*(t,x,z1,z2)).
std::array<double, 2> coupled_generators(const GameSpec& spec, double t, const Vector& x,
                                         const Vector& z1, const Vector& z2);

/// Raw lattice mass sum_y h^{2m} xi_n(c - y) of the normalized kernel
/// around center c; 1 up to lattice quadrature error.
double mollifier_raw_mass(const MollifyParams& params, int dim_m, const std::vector<double>& center);

/// Sum of the renormalized lattice weights (1 up to rounding).
double mollifier_weight_sum(const MollifyParams& params, int dim_m, const std::vector<double>& center);

struct GeneratorReport {
    int n = 0;
    // (a) Lipschitz in (z1, z2) by random finite differences at two step sizes.
    double lipschitz_coarse = 0.0;
    double lipschitz_fine = 0.0;
    bool lipschitz_pass = false;
    // (b) growth: fitted constant vs the constant implied by the declared growth bounds.
    double fitted_growth_constant = 0.0;
    double certified_growth_constant = 0.0;
    double growth_ratio = 0.0;
    bool growth_pass = false;
    // (c) empirical global sup.
    double global_sup = 0.0;
    bool bound_pass = false;
    // (d) sup over [-5,5]^{2m} of |H^n - H| at level n and 2n.
    double compact_distance = 0.0;
    double compact_distance_doubled = 0.0;
    bool convergence_pass = false;
    // exactness of the cutoff: max |H^n| over samples with |z|^2 >= 4 n^2.
    double outside_cutoff_max = 0.0;

    bool pass() const {
        return lipschitz_pass && growth_pass && bound_pass && convergence_pass &&
               outside_cutoff_max == 0.0;
    }
};

/// Empirical check of the approximating-generator properties (a)-(d).
GeneratorReport verify_generator_properties(const GameSpec& spec, const MollifyParams& params,
                                            int sample_count, std::uint64_t seed);

/// sup over a tensor grid on [-radius, radius]^{2m} of |H_i^n - H_i| (both
/// players) at fixed (t, x).
double compact_sup_distance(const GameSpec& spec, const MollifyParams& params, double t,
                            const Vector& x, double radius = 5.0, int points_per_axis = 0);

}  // namespace nashbsde
