#include "nashbsde/types.hpp"

#include <algorithm>

namespace nashbsde {

Box::Box(Vector lo_, Vector hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw DomainError("box bounds have different dimensions");
    if (lo.size() > kMaxDim) throw DomainError("box dimension exceeds kMaxDim");
    for (int j = 0; j < lo.size(); ++j) {
        if (!(lo[j] <= hi[j])) throw DomainError("box lower bound exceeds upper bound");
    }
}

Box Box::cube(int dim, double lo, double hi) {
    return Box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

bool Box::contains(const Vector& v, double tol) const {
    if (v.size() != lo.size()) return false;
    for (int j = 0; j < v.size(); ++j) {
        if (!(v[j] >= lo[j] - tol && v[j] <= hi[j] + tol)) return false;
    }
    return true;
}

Vector Box::clamp(const Vector& v) const {
    Vector out(v.size());
    for (int j = 0; j < v.size(); ++j) out[j] = std::min(hi[j], std::max(lo[j], v[j]));
    return out;
}

Vector make_vector(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    int j = 0;
    for (double x : values) v[j++] = x;
    return v;
}

}  // namespace nashbsde
