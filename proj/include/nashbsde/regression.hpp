#pragma once

#include "nashbsde/types.hpp"

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include <span>
#include <string>
#include <vector>

namespace nashbsde {

enum class BasisKind { global_poly, local_partition };

/// Polynomial regression basis in coordinates scaled to [-1, 1] over a box.
///   global_poly:     monomials of total degree <= degree on the whole box;
///   local_partition: cells_per_axis^m equal cells, each with its own
///                    monomials of total degree <= degree in cell coordinates.
struct RegressionBasis {
    BasisKind kind = BasisKind::global_poly;
    int degree = 2;
    int cells_per_axis = 1;

    int cell_count(int dim) const;
    int local_size(int dim) const;
    int size(int dim) const { return cell_count(dim) * local_size(dim); }
    void validate(int dim) const;
};

/// Scaling box of one regression knot. A degenerate box (zero spread in
/// every coordinate) fits the constant term only.
struct KnotBox {
    Vector lo;
    Vector hi;
    bool degenerate = false;

    bool contains(const Vector& x, double rel_tol = 1e-9) const;
};

/// Cell index and local basis values of x.
struct BasisRow {
    int cell = 0;
    std::vector<double> values;
};

BasisRow evaluate_basis(const RegressionBasis& basis, const KnotBox& box, const Vector& x);

/// Exponent multi-indices of total degree <= degree in graded order; the
/// constant term comes first.
std::vector<std::vector<int>> monomial_exponents(int dim, int degree);

/// Least-squares projection onto the basis for one fixed sample cloud.
/// Normal equations per cell with ridge 1e-10 on the diagonal; the design is
/// factored once and reused for every right-hand side.
class KnotRegression {
public:
    static constexpr double kRidge = 1e-10;
    static constexpr double kMaxCondition = 1e12;

    /// `points` is row-major n x dim. Throws NumericalError naming `label`
    /// when a fully populated cell has condition number above kMaxCondition.
    KnotRegression(const RegressionBasis& basis, std::span<const double> points, int dim,
                   const std::string& label);

    const KnotBox& box() const noexcept { return box_; }
    int size() const noexcept { return total_size_; }
    double condition_number() const noexcept { return condition_; }
    int reduced_cells() const noexcept { return reduced_cells_; }

    Eigen::VectorXd fit(std::span<const double> target) const;
    void predict(const Eigen::VectorXd& coeffs, std::span<double> out) const;

private:
    struct Cell {
        std::vector<int> rows;
        Eigen::LDLT<Eigen::MatrixXd> solver;
        int active = 0;  // number of local basis functions actually fitted
    };

    RegressionBasis basis_;
    KnotBox box_;
    int dim_ = 0;
    int local_size_ = 0;
    int total_size_ = 0;
    double condition_ = 1.0;
    int reduced_cells_ = 0;
    std::vector<int> cell_of_;
    Eigen::MatrixXd design_;  // n x local_size
    std::vector<Cell> cells_;
};

/// Evaluates sum_k coeffs_k phi_k(x) for a knot fitted on `box`.
double evaluate_expansion(const RegressionBasis& basis, const KnotBox& box,
                          const Eigen::VectorXd& coeffs, const Vector& x);

}  // namespace nashbsde
