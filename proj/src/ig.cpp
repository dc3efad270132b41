#include "igulora/ig.hpp"

#include <cmath>

namespace igulora {

PqField PqField::zeros_like(const std::vector<SvdView>& views) {
    PqField f;
    f.p.reserve(views.size());
    f.q.reserve(views.size());
    for (const auto& v : views) {
        f.p.push_back(Matrix::Zero(v.p.rows(), v.p.cols()));
        f.q.push_back(Matrix::Zero(v.q.rows(), v.q.cols()));
    }
    return f;
}

bool PqField::same_shape(const PqField& other) const {
    if (p.size() != other.p.size() || q.size() != other.q.size()) {
        return false;
    }
    for (std::size_t l = 0; l < p.size(); ++l) {
        if (p[l].rows() != other.p[l].rows() || p[l].cols() != other.p[l].cols() ||
            q[l].rows() != other.q[l].rows() || q[l].cols() != other.q[l].cols()) {
            return false;
        }
    }
    return true;
}

double PqField::sum_abs() const {
    double total = 0.0;
    for (const auto& m : p) {
        total += m.cwiseAbs().sum();
    }
    for (const auto& m : q) {
        total += m.cwiseAbs().sum();
    }
    return total;
}

double PqField::max_abs() const {
    double best = 0.0;
    for (const auto& m : p) {
        if (m.size() > 0) {
            best = std::max(best, m.cwiseAbs().maxCoeff());
        }
    }
    for (const auto& m : q) {
        if (m.size() > 0) {
            best = std::max(best, m.cwiseAbs().maxCoeff());
        }
    }
    return best;
}

PqField operator+(PqField lhs, const PqField& rhs) {
    if (!lhs.same_shape(rhs)) {
        throw DimensionError("PqField addition: shape mismatch");
    }
    for (std::size_t l = 0; l < lhs.p.size(); ++l) {
        lhs.p[l] += rhs.p[l];
        lhs.q[l] += rhs.q[l];
    }
    return lhs;
}

PqField operator*(double s, PqField f) {
    for (auto& m : f.p) {
        m *= s;
    }
    for (auto& m : f.q) {
        m *= s;
    }
    return f;
}

PqField pq_weights(const std::vector<SvdView>& views) {
    PqField w;
    w.p.reserve(views.size());
    w.q.reserve(views.size());
    for (const auto& v : views) {
        w.p.push_back(v.p.cwiseAbs());
        w.q.push_back(v.q.cwiseAbs());
    }
    return w;
}

PathGradFn make_path_grad(const Network& net, const std::vector<SvdView>& views, const Batch& batch) {
    return [&net, &views, &batch](double alpha) -> PqField {
        PqGrads g = grad_pq(net, views, batch, alpha);
        PqField f;
        f.p = std::move(g.p);
        f.q = std::move(g.q);
        return f;
    };
}

namespace {

// Shared final step: score = |w| * |acc| / (2N). Keeping one code path makes
// the N=2 stochastic/full agreement bitwise.
PqField finish_score(const PqField& weights, PqField acc, int n) {
    if (!weights.same_shape(acc)) {
        throw DimensionError("ig score: gradient/weight shape mismatch");
    }
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t l = 0; l < acc.p.size(); ++l) {
        acc.p[l] = (weights.p[l].array() * acc.p[l].array().abs() * scale).matrix();
        acc.q[l] = (weights.q[l].array() * acc.q[l].array().abs() * scale).matrix();
        require_finite("ig score", acc.p[l]);
        require_finite("ig score", acc.q[l]);
    }
    return acc;
}

PqField three_node_accum(const PathGradFn& grad, double alpha_k) {
    PqField acc = grad(0.0);
    acc = std::move(acc) + 2.0 * grad(alpha_k);
    acc = std::move(acc) + grad(1.0);
    return acc;
}

} // namespace

PqField ig_full(const PqField& weights, const PathGradFn& grad, int n) {
    if (n < 1) {
        throw Error("ig_full: N must be >= 1");
    }
    // Accumulation order matches three_node_accum so that N=2 (where the
    // interior node set is the singleton {1/2}) agrees bitwise with the
    // stochastic estimator.
    PqField acc = grad(0.0);
    for (int k = 1; k < n; ++k) {
        acc = std::move(acc) + 2.0 * grad(static_cast<double>(k) / static_cast<double>(n));
    }
    acc = std::move(acc) + grad(1.0);
    return finish_score(weights, std::move(acc), n);
}

PqField ig_stochastic(const PqField& weights, const PathGradFn& grad, int n, Prng& rng) {
    if (n < 2) {
        throw Error("ig_stochastic: N must be >= 2");
    }
    const std::uint64_t k = 1 + rng.below(static_cast<std::uint64_t>(n - 1));
    return ig_stochastic_node(weights, grad, n, static_cast<double>(k) / static_cast<double>(n));
}

PqField ig_stochastic_node(const PqField& weights, const PathGradFn& grad, int n, double alpha_k) {
    if (n < 2) {
        throw Error("ig_stochastic: N must be >= 2");
    }
    return finish_score(weights, three_node_accum(grad, alpha_k), n);
}

PqField aggregate_epoch(const std::vector<PqField>& per_batch, int m) {
    if (per_batch.empty() || m != static_cast<int>(per_batch.size())) {
        throw Error("aggregate_epoch: M does not match the number of per-batch scores");
    }
    PqField acc = per_batch.front();
    for (std::size_t i = 1; i < per_batch.size(); ++i) {
        if (!acc.same_shape(per_batch[i])) {
            throw DimensionError("aggregate_epoch: shape drift within epoch");
        }
        acc = std::move(acc) + per_batch[i];
    }
    return (1.0 / static_cast<double>(m)) * std::move(acc);
}

PqField epoch_estimator(const PqField& weights, const PathGradFn& grad, int n,
                        const std::vector<double>& nodes) {
    if (n < 2) {
        throw Error("epoch_estimator: N must be >= 2");
    }
    if (nodes.empty()) {
        throw Error("epoch_estimator: no sampled nodes");
    }
    PqField mean = grad(nodes.front());
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        mean = std::move(mean) + grad(nodes[i]);
    }
    mean = (1.0 / static_cast<double>(nodes.size())) * std::move(mean);

    PqField acc = grad(0.0);
    acc = std::move(acc) + (2.0 * static_cast<double>(n - 1)) * std::move(mean);
    acc = std::move(acc) + grad(1.0);
    return finish_score(weights, std::move(acc), n);
}

double theorem1_bound(double w_abs, const BoundInputs& inputs, int n, int m) {
    if (n < 1 || m < 1) {
        throw Error("theorem1_bound: N and M must be >= 1");
    }
    if (!(inputs.delta > 0.0 && inputs.delta < 1.0)) {
        throw Error("theorem1_bound: delta must lie in (0, 1)");
    }
    const double nn = static_cast<double>(n);
    const double discretization = w_abs * inputs.c2_hat / (12.0 * nn * nn);
    const double sampling = inputs.c_const * w_abs * inputs.b_hat *
                            std::sqrt(std::log(1.0 / inputs.delta) / static_cast<double>(m));
    return discretization + sampling;
}

double field_entry(const PqField& f, const EntryRef& e) {
    const auto& m = e.which == EntryRef::Which::P ? f.p.at(static_cast<std::size_t>(e.layer))
                                                  : f.q.at(static_cast<std::size_t>(e.layer));
    return m(e.row, e.col);
}

PqField estimate_c2_field(const PathGradFn& grad, int probes) {
    if (probes < 3) {
        throw Error("estimate_c2: need at least 3 probes");
    }
    const double h = 1.0 / (2.0 * static_cast<double>(probes));
    // Grid centers (j+0.5)/probes; their +-h neighbours land on j/probes, so
    // g is evaluated once per distinct node.
    std::vector<PqField> at_edges;
    at_edges.reserve(static_cast<std::size_t>(probes) + 1);
    for (int j = 0; j <= probes; ++j) {
        at_edges.push_back(grad(static_cast<double>(j) / static_cast<double>(probes)));
    }
    PqField best;
    for (int j = 0; j < probes; ++j) {
        const double center = (static_cast<double>(j) + 0.5) / static_cast<double>(probes);
        PqField mid = grad(center);
        PqField second = at_edges[static_cast<std::size_t>(j)];
        second = std::move(second) + (-2.0) * std::move(mid);
        second = std::move(second) + at_edges[static_cast<std::size_t>(j) + 1];
        second = (1.0 / (h * h)) * std::move(second);
        if (j == 0) {
            best = std::move(second);
            for (auto& m : best.p) {
                m = m.cwiseAbs();
            }
            for (auto& m : best.q) {
                m = m.cwiseAbs();
            }
        } else {
            for (std::size_t l = 0; l < best.p.size(); ++l) {
                best.p[l] = best.p[l].cwiseMax(second.p[l].cwiseAbs());
                best.q[l] = best.q[l].cwiseMax(second.q[l].cwiseAbs());
            }
        }
    }
    return best;
}

double estimate_c2(const Network& net, const std::vector<SvdView>& views, const Batch& batch,
                   const EntryRef& entry, int probes) {
    PqField field = estimate_c2_field(make_path_grad(net, views, batch), probes);
    return field_entry(field, entry);
}

double estimate_b_field_max(const PathGradFn& grad, int n) {
    if (n < 2) {
        throw Error("estimate_b: N must be >= 2");
    }
    double best = 0.0;
    for (int k = 1; k < n; ++k) {
        best = std::max(best, grad(static_cast<double>(k) / static_cast<double>(n)).max_abs());
    }
    return best;
}

double estimate_b(const Network& net, const std::vector<SvdView>& views, const Batch& batch, int n) {
    return estimate_b_field_max(make_path_grad(net, views, batch), n);
}

double completeness_gap(const Network& net, const std::vector<SvdView>& views, const Batch& batch,
                        int n_dense) {
    if (n_dense < 64) {
        throw Error("completeness_gap: n_dense must be >= 64");
    }
    // The path runs each factor from 0 to its endpoint so that the product
    // traces alpha * P diag(lambda) Q; each of P, Q, lambda then carries one
    // third of the path measure, and the per-entry signed attribution is
    // (1/3) w * integral of the factor gradient at the path point.
    double attribution = 0.0;
    const double nn = static_cast<double>(n_dense);
    for (int k = 0; k <= n_dense; ++k) {
        const double alpha = static_cast<double>(k) / nn;
        const double weight = (k == 0 || k == n_dense) ? 0.5 / nn : 1.0 / nn;
        PqGrads g = grad_pq_at_path(net, views, batch, alpha);
        double integrand = 0.0;
        for (std::size_t l = 0; l < views.size(); ++l) {
            integrand += (views[l].p.array() * g.p[l].array()).sum();
            integrand += (views[l].q.array() * g.q[l].array()).sum();
            integrand += (views[l].lambda.array() * g.lambda[l].array()).sum();
        }
        if (!std::isfinite(integrand)) {
            throw NonFiniteError("completeness_gap: non-finite attribution term");
        }
        attribution += weight * integrand / 3.0;
    }
    const double diff =
        forward_loss_views(net, views, batch, 1.0) - forward_loss_views(net, views, batch, 0.0);
    return std::abs(attribution - diff) / std::max(1.0, std::abs(diff));
}

} // namespace igulora
