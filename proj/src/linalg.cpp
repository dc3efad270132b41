#include "igulora/linalg.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <numeric>
#include <vector>

namespace igulora {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                             " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    Matrix out = a * b;
    require_finite("matmul result", out);
    return out;
}

double frobenius_norm(const Matrix& m) { return m.norm(); }

SvdView svd_thin(const Matrix& m) {
    if (m.rows() < 1 || m.cols() < 1) {
        throw DimensionError("svd_thin: empty matrix");
    }
    require_finite("svd_thin input", m);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        throw Error("svd_thin: Jacobi iteration did not converge");
    }
    SvdView view;
    view.p = svd.matrixU();
    view.lambda = svd.singularValues();
    view.q = svd.matrixV().transpose();
    return view;
}

SvdView canonicalize(SvdView v) {
    const Index r = v.rank();
    std::vector<Index> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return v.lambda[a] > v.lambda[b]; });

    SvdView out;
    out.p.resize(v.p.rows(), r);
    out.lambda.resize(r);
    out.q.resize(r, v.q.cols());
    for (Index i = 0; i < r; ++i) {
        const Index src = order[static_cast<std::size_t>(i)];
        out.lambda[i] = v.lambda[src];

        // First row holding the column's max |entry| decides the sign.
        Index pivot = 0;
        double best = -1.0;
        for (Index k = 0; k < v.p.rows(); ++k) {
            const double mag = std::abs(v.p(k, src));
            if (mag > best) {
                best = mag;
                pivot = k;
            }
        }
        const double sign = v.p(pivot, src) < 0.0 ? -1.0 : 1.0;
        out.p.col(i) = sign * v.p.col(src);
        out.q.row(i) = sign * v.q.row(src);
    }
    return out;
}

Matrix reconstruct(const SvdView& v) { return v.p * v.lambda.asDiagonal() * v.q; }

SvdView truncate(SvdView v, Index r) {
    if (r < 0 || r > v.rank()) {
        throw DimensionError("truncate: rank " + std::to_string(r) + " out of range");
    }
    SvdView out;
    out.p = v.p.leftCols(r);
    out.lambda = v.lambda.head(r);
    out.q = v.q.topRows(r);
    return out;
}

} // namespace igulora
