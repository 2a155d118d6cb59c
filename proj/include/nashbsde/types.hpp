#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nashbsde {

/// Largest state, noise and control dimension supported. Vectors up to this
/// size live inline (no heap traffic in the per-path loops).
inline constexpr int kMaxDim = 4;

using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                             kMaxDim, kMaxDim>;

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent configuration. `what()` names the offending field.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Simulation or linear-algebra failure (non-finite values, singular systems).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Caller broke an API precondition (e.g. wrong kind of path bundle).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

enum class Player : int { first = 0, second = 1 };

inline constexpr std::array<Player, 2> kPlayers{Player::first, Player::second};

constexpr int index(Player p) noexcept { return static_cast<int>(p); }

/// 1-based label used in reports and CSV output.
constexpr int label(Player p) noexcept { return static_cast<int>(p) + 1; }

/// Axis-aligned box [lo, hi] in R^d.
struct Box {
    Vector lo;
    Vector hi;

    Box() = default;
    Box(Vector lo_, Vector hi_);

    static Box cube(int dim, double lo, double hi);

    int dim() const noexcept { return static_cast<int>(lo.size()); }
    bool contains(const Vector& v, double tol = 1e-12) const;
    Vector clamp(const Vector& v) const;
    Vector width() const { return hi - lo; }
    Vector midpoint() const { return 0.5 * (lo + hi); }
};

Vector make_vector(std::initializer_list<double> values);

}  // namespace nashbsde
