#include "nashbsde/regression.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace nashbsde {

namespace {

constexpr int kCachedDegree = 8;

std::vector<std::vector<int>> build_exponents(int dim, int degree) {
    std::vector<std::vector<int>> out;
    for (int total = 0; total <= degree; ++total) {
        // All compositions of `total` into `dim` parts, first coordinate descending.
        std::vector<int> cur(static_cast<std::size_t>(dim), 0);
        auto rec = [&](auto&& self, int j, int remaining) -> void {
            if (j == dim - 1) {
                cur[static_cast<std::size_t>(j)] = remaining;
                out.push_back(cur);
                return;
            }
            for (int a = remaining; a >= 0; --a) {
                cur[static_cast<std::size_t>(j)] = a;
                self(self, j + 1, remaining - a);
            }
        };
        rec(rec, 0, total);
    }
    return out;
}

const std::vector<std::vector<int>>& cached_exponents(int dim, int degree) {
    static const auto table = [] {
        std::array<std::array<std::vector<std::vector<int>>, kCachedDegree + 1>, kMaxDim + 1> t;
        for (int d = 1; d <= kMaxDim; ++d) {
            for (int g = 0; g <= kCachedDegree; ++g) t[d][g] = build_exponents(d, g);
        }
        return t;
    }();
    return table[static_cast<std::size_t>(dim)][static_cast<std::size_t>(degree)];
}

long binomial(int n, int k) {
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// Calls visit(cell, k, phi_k(x)) for the local basis functions of x's cell.
template <class Visit>
void visit_basis(const RegressionBasis& basis, const KnotBox& box, const Vector& x, int dim,
                 Visit&& visit) {
    if (box.degenerate) {
        visit(0, 0, 1.0);
        return;
    }
    std::array<double, kMaxDim> local{};
    int cell = 0;
    const int cells = basis.kind == BasisKind::local_partition ? basis.cells_per_axis : 1;
    for (int j = 0; j < dim; ++j) {
        const double half = 0.5 * (box.hi[j] - box.lo[j]);
        const double scaled = half > 0.0 ? (x[j] - 0.5 * (box.hi[j] + box.lo[j])) / half : 0.0;
        if (cells == 1) {
            local[static_cast<std::size_t>(j)] = scaled;
            continue;
        }
        const double pos = 0.5 * (scaled + 1.0) * cells;
        const int c = std::clamp(static_cast<int>(std::floor(pos)), 0, cells - 1);
        local[static_cast<std::size_t>(j)] = 2.0 * (pos - c) - 1.0;
        cell = cell * cells + c;
    }
    const int degree = basis.degree;
    if (degree > kCachedDegree) {
        int k = 0;
        for (const auto& e : build_exponents(dim, degree)) {
            double v = 1.0;
            for (int j = 0; j < dim; ++j) {
                v *= std::pow(local[static_cast<std::size_t>(j)], e[static_cast<std::size_t>(j)]);
            }
            visit(cell, k++, v);
        }
        return;
    }
    const auto& exps = cached_exponents(dim, degree);
    std::array<std::array<double, kCachedDegree + 1>, kMaxDim> powers{};
    for (int j = 0; j < dim; ++j) {
        powers[static_cast<std::size_t>(j)][0] = 1.0;
        for (int p = 1; p <= degree; ++p) {
            powers[static_cast<std::size_t>(j)][static_cast<std::size_t>(p)] =
                powers[static_cast<std::size_t>(j)][static_cast<std::size_t>(p - 1)] * local[static_cast<std::size_t>(j)];
        }
    }
    int k = 0;
    for (const auto& e : exps) {
        double v = 1.0;
        for (int j = 0; j < dim; ++j) v *= powers[static_cast<std::size_t>(j)][static_cast<std::size_t>(e[static_cast<std::size_t>(j)])];
        visit(cell, k++, v);
    }
}

}  // namespace

int RegressionBasis::cell_count(int dim) const {
    if (kind == BasisKind::global_poly) return 1;
    int c = 1;
    for (int j = 0; j < dim; ++j) c *= cells_per_axis;
    return c;
}

int RegressionBasis::local_size(int dim) const {
    return static_cast<int>(binomial(dim + degree, degree));
}

void RegressionBasis::validate(int dim) const {
    if (dim < 1 || dim > kMaxDim) throw ConfigError("basis: dimension must be in [1, 4]");
    if (degree < 0) throw ConfigError("basis.degree must be >= 0");
    if (kind == BasisKind::local_partition && cells_per_axis < 1) {
        throw ConfigError("basis.cells must be >= 1");
    }
}

bool KnotBox::contains(const Vector& x, double rel_tol) const {
    if (degenerate) return (x - lo).cwiseAbs().maxCoeff() <= rel_tol * (1.0 + lo.cwiseAbs().maxCoeff());
    for (int j = 0; j < x.size(); ++j) {
        const double tol = rel_tol * (1.0 + std::max(std::abs(lo[j]), std::abs(hi[j])));
        if (x[j] < lo[j] - tol || x[j] > hi[j] + tol) return false;
    }
    return true;
}

std::vector<std::vector<int>> monomial_exponents(int dim, int degree) {
    return build_exponents(dim, degree);
}

BasisRow evaluate_basis(const RegressionBasis& basis, const KnotBox& box, const Vector& x) {
    BasisRow row;
    const int dim = static_cast<int>(x.size());
    row.values.assign(static_cast<std::size_t>(basis.local_size(dim)), 0.0);
    visit_basis(basis, box, x, dim, [&](int cell, int k, double v) {
        row.cell = cell;
        row.values[static_cast<std::size_t>(k)] = v;
    });
    return row;
}

double evaluate_expansion(const RegressionBasis& basis, const KnotBox& box,
                          const Eigen::VectorXd& coeffs, const Vector& x) {
    const int dim = static_cast<int>(x.size());
    const int local = basis.local_size(dim);
    double acc = 0.0;
    visit_basis(basis, box, x, dim, [&](int cell, int k, double v) {
        acc += coeffs[cell * local + k] * v;
    });
    return acc;
}

KnotRegression::KnotRegression(const RegressionBasis& basis, std::span<const double> points,
                               int dim, const std::string& label)
    : basis_(basis), dim_(dim) {
    basis.validate(dim);
    const auto n = points.size() / static_cast<std::size_t>(dim);
    if (n == 0) throw NumericalError("regression at " + label + ": empty sample cloud");
    local_size_ = basis.local_size(dim);
    total_size_ = basis.size(dim);

    box_.lo = Vector::Constant(dim, std::numeric_limits<double>::infinity());
    box_.hi = Vector::Constant(dim, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) {
            const double v = points[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(j)];
            box_.lo[j] = std::min(box_.lo[j], v);
            box_.hi[j] = std::max(box_.hi[j], v);
        }
    }
    box_.degenerate = true;
    for (int j = 0; j < dim; ++j) {
        const double scale = 1.0 + std::max(std::abs(box_.lo[j]), std::abs(box_.hi[j]));
        if (box_.hi[j] - box_.lo[j] > 1e-14 * scale) box_.degenerate = false;
    }

    if (!box_.degenerate && total_size_ * 10 > static_cast<int>(n)) {
        throw NumericalError("regression at " + label + ": basis size " + std::to_string(total_size_) +
                             " exceeds n_paths / 10");
    }

    design_.setZero(static_cast<Eigen::Index>(n), local_size_);
    cell_of_.assign(n, 0);
    cells_.resize(box_.degenerate ? 1 : static_cast<std::size_t>(basis.cell_count(dim)));
    Vector x(dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) x[j] = points[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(j)];
        visit_basis(basis_, box_, x, dim, [&](int cell, int k, double v) {
            cell_of_[i] = cell;
            design_(static_cast<Eigen::Index>(i), k) = v;
        });
        cells_[static_cast<std::size_t>(cell_of_[i])].rows.push_back(static_cast<int>(i));
    }

    for (auto& cell : cells_) {
        const auto count = static_cast<int>(cell.rows.size());
        if (box_.degenerate) {
            cell.active = 1;
        } else if (count >= 2 * local_size_) {
            cell.active = local_size_;
        } else {
            cell.active = count > 0 ? 1 : 0;
            ++reduced_cells_;
        }
        if (cell.active == 0) continue;
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(cell.active, cell.active);
        for (int r : cell.rows) {
            const auto row = design_.row(r).head(cell.active);
            gram.noalias() += row.transpose() * row;
        }
        gram /= static_cast<double>(count);
        if (cell.active > 1) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
            const double lo = eig.eigenvalues().minCoeff();
            const double hi = eig.eigenvalues().maxCoeff();
            const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
            condition_ = std::max(condition_, cond);
            if (cond > kMaxCondition) {
                throw NumericalError("regression at " + label + ": singular design (condition number " +
                                     std::to_string(cond) + ")");
            }
        }
        gram.diagonal().array() += kRidge;
        cell.solver.compute(gram);
    }
}

Eigen::VectorXd KnotRegression::fit(std::span<const double> target) const {
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(total_size_);
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        const Cell& cell = cells_[c];
        if (cell.active == 0) continue;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(cell.active);
        for (int r : cell.rows) {
            rhs.noalias() += design_.row(r).head(cell.active).transpose() * target[static_cast<std::size_t>(r)];
        }
        rhs /= static_cast<double>(cell.rows.size());
        coeffs.segment(static_cast<Eigen::Index>(c) * local_size_, cell.active) = cell.solver.solve(rhs);
    }
    return coeffs;
}

void KnotRegression::predict(const Eigen::VectorXd& coeffs, std::span<double> out) const {
    const auto n = static_cast<std::size_t>(design_.rows());
    for (std::size_t i = 0; i < n; ++i) {
        const auto seg = coeffs.segment(static_cast<Eigen::Index>(cell_of_[i]) * local_size_, local_size_);
        out[i] = design_.row(static_cast<Eigen::Index>(i)).dot(seg);
    }
}

}  // namespace nashbsde
