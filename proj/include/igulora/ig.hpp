#pragma once

#include "igulora/model.hpp"
#include "igulora/prng.hpp"
#include "igulora/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace igulora {

// Per-layer pair of matrices shaped like P (d1 x r) and Q (r x d2). Carries
// importance scores (non-negative) as well as gradient fields.
struct PqField {
    std::vector<Matrix> p;
    std::vector<Matrix> q;

    static PqField zeros_like(const std::vector<SvdView>& views);
    bool same_shape(const PqField& other) const;
    double sum_abs() const;
    double max_abs() const;
};

PqField operator+(PqField lhs, const PqField& rhs);
PqField operator*(double s, PqField f);

// |entries| of P and Q; the |w| prefactor of the IG score.
PqField pq_weights(const std::vector<SvdView>& views);

// Path gradient g(alpha) for every P and Q entry, as a field.
using PathGradFn = std::function<PqField(double alpha)>;

PathGradFn make_path_grad(const Network& net, const std::vector<SvdView>& views, const Batch& batch);

struct QuadratureSpec {
    enum class Mode { Full, Stochastic };
    int n = 20;
    Mode mode = Mode::Stochastic;
    std::string rng_label = "quad";
};

// Composite trapezoid over alpha in [0,1] with N subintervals:
// |w|/(2N) * |g(0) + 2 sum_k g(k/N) + g(1)|. N+1 gradient evaluations.
PqField ig_full(const PqField& weights, const PathGradFn& grad, int n);

// Single sampled interior node alpha_k = k/N, k uniform in {1..N-1}:
// |w|/(2N) * |g(0) + 2 g(alpha_k) + g(1)|. Exactly 3 gradient evaluations.
PqField ig_stochastic(const PqField& weights, const PathGradFn& grad, int n, Prng& rng);

// Same formula with the node fixed by the caller (degenerate cases, the
// no-alpha ablation, and enumeration tests).
PqField ig_stochastic_node(const PqField& weights, const PathGradFn& grad, int n, double alpha_k);

// Entrywise mean over the epoch's per-batch scores.
PqField aggregate_epoch(const std::vector<PqField>& per_batch, int m);

// Epoch-level estimator in the form the error bound is proved for:
// |w|/(2N) * |g(0) + 2 (N-1) mean_p g(alpha_p) + g(1)|.
PqField epoch_estimator(const PqField& weights, const PathGradFn& grad, int n,
                        const std::vector<double>& nodes);

struct BoundInputs {
    double c2_hat = 0.0;
    double b_hat = 0.0;
    double delta = 0.05;
    double c_const = 1.0;
};

// |w| C2 / (12 N^2) + c |w| B sqrt(log(1/delta) / M)
double theorem1_bound(double w_abs, const BoundInputs& inputs, int n, int m);

struct EntryRef {
    int layer = 0;
    enum class Which { P, Q } which = Which::P;
    Index row = 0;
    Index col = 0;
};

double field_entry(const PqField& f, const EntryRef& e);

// Max over a uniform alpha grid of the central second difference of g,
// h = 1/(2*probes); the empirical C2 of the smoothness assumption.
PqField estimate_c2_field(const PathGradFn& grad, int probes);
double estimate_c2(const Network& net, const std::vector<SvdView>& views, const Batch& batch,
                   const EntryRef& entry, int probes);

// Max over interior nodes k/n of |g|, reduced over all entries; the
// empirical bound B on the sampled gradient values.
double estimate_b(const Network& net, const std::vector<SvdView>& views, const Batch& batch, int n);
double estimate_b_field_max(const PathGradFn& grad, int n);

// Relative completeness defect of the signed path attribution: every P, Q
// and lambda entry is attributed along the product path whose weight-space
// trace is alpha * P diag(lambda) Q, and the signed sum is compared with
// L(DeltaW) - L(0).
double completeness_gap(const Network& net, const std::vector<SvdView>& views, const Batch& batch,
                        int n_dense);

} // namespace igulora
