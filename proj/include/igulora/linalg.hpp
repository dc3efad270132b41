#pragma once

#include "igulora/types.hpp"

namespace igulora {

// Thin SVD of an adapter product: source = p * diag(lambda) * q with
// p (d1 x r), lambda (r), q (r x d2), r = min(d1, d2) unless truncated.
struct SvdView {
    Matrix p;
    Vector lambda;
    Matrix q;

    Index rank() const { return lambda.size(); }
};

Matrix matmul(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& m);

SvdView svd_thin(const Matrix& m);

// Deterministic representative of the SVD's sign/order ambiguity: lambda
// descending (ties keep original order) and each column of p flipped so its
// largest-magnitude entry is positive (first such row wins ties), with the
// matching row of q flipped alongside. Idempotent, reconstruction-preserving.
SvdView canonicalize(SvdView v);

Matrix reconstruct(const SvdView& v);

// Leading r triplets. Used to keep views at the adapter's factor rank.
SvdView truncate(SvdView v, Index r);

} // namespace igulora
