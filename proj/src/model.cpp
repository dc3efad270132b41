#include "igulora/model.hpp"

#include <cmath>
#include <functional>

namespace igulora {

namespace {

// Adapter contribution (before scaling by alpha) for layer l.
using DeltaFn = std::function<Matrix(std::size_t)>;

DeltaFn delta_from_factors(const Network& net) {
    return [&net](std::size_t l) -> Matrix { return net.layers[l].a * net.layers[l].b; };
}

DeltaFn delta_from_views(const std::vector<SvdView>& views) {
    return [&views](std::size_t l) -> Matrix { return reconstruct(views[l]); };
}

struct Trace {
    std::vector<Matrix> x; // x[l] = input to layer l; x[L] = final output
    std::vector<Matrix> w; // effective weight per layer
    double loss = 0.0;
};

Matrix apply_activation(const Matrix& z, Activation act) {
    if (act == Activation::Tanh) {
        return z.array().tanh().matrix();
    }
    return z.cwiseMax(0.0);
}

Matrix activation_grad(const Matrix& z, const Matrix& upstream, Activation act) {
    if (act == Activation::Tanh) {
        return (upstream.array() * (1.0 - z.array().tanh().square())).matrix();
    }
    return (upstream.array() * (z.array() > 0.0).cast<double>()).matrix();
}

Matrix softmax_rows(const Matrix& z) {
    Matrix out(z.rows(), z.cols());
    for (Index i = 0; i < z.rows(); ++i) {
        const double m = z.row(i).maxCoeff();
        Eigen::ArrayXd e = (z.row(i).array() - m).exp();
        out.row(i) = (e / e.sum()).matrix();
    }
    return out;
}

double loss_value(const Matrix& pred, const Matrix& targets, LossKind kind) {
    if (kind == LossKind::Mse) {
        if (pred.rows() != targets.rows() || pred.cols() != targets.cols()) {
            throw DimensionError("loss: prediction/target shape mismatch");
        }
        return (pred - targets).squaredNorm() /
               static_cast<double>(pred.rows() * pred.cols());
    }
    if (targets.cols() != 1) {
        throw DimensionError("softmax loss: targets must be batch x 1 class indices");
    }
    const Matrix probs = softmax_rows(pred);
    double total = 0.0;
    for (Index i = 0; i < pred.rows(); ++i) {
        const Index cls = static_cast<Index>(targets(i, 0));
        if (cls < 0 || cls >= pred.cols()) {
            throw DimensionError("softmax loss: class index out of range");
        }
        total -= std::log(std::max(probs(i, cls), 1e-300));
    }
    return total / static_cast<double>(pred.rows());
}

Matrix loss_grad(const Matrix& pred, const Matrix& targets, LossKind kind) {
    if (kind == LossKind::Mse) {
        return (2.0 / static_cast<double>(pred.rows() * pred.cols())) * (pred - targets);
    }
    Matrix g = softmax_rows(pred);
    for (Index i = 0; i < pred.rows(); ++i) {
        g(i, static_cast<Index>(targets(i, 0))) -= 1.0;
    }
    return g / static_cast<double>(pred.rows());
}

Trace forward(const Network& net, const Batch& batch, double alpha, const DeltaFn& delta) {
    const std::size_t depth = net.layers.size();
    Trace tr;
    tr.x.reserve(depth + 1);
    tr.w.reserve(depth);
    tr.x.push_back(batch.inputs);
    for (std::size_t l = 0; l < depth; ++l) {
        Matrix w_eff = net.layers[l].w0 + alpha * delta(l);
        Matrix z = tr.x.back() * w_eff;
        tr.w.push_back(std::move(w_eff));
        tr.x.push_back(l + 1 < depth ? apply_activation(z, net.activation) : std::move(z));
    }
    tr.loss = loss_value(tr.x.back(), batch.targets, net.loss);
    if (!std::isfinite(tr.loss)) {
        throw NonFiniteError("forward_loss: non-finite loss");
    }
    return tr;
}

BackwardResult backward(const Network& net, const Batch& batch, double alpha, const DeltaFn& delta) {
    const std::size_t depth = net.layers.size();
    Trace tr = forward(net, batch, alpha, delta);

    BackwardResult res;
    res.loss = tr.loss;
    res.dw.resize(depth);

    Matrix gx = loss_grad(tr.x.back(), batch.targets, net.loss);
    for (std::size_t l = depth; l-- > 0;) {
        // Between layers the stored x[l+1] is the post-activation value; the
        // pre-activation is x[l] * w[l].
        Matrix gz;
        if (l + 1 < depth) {
            Matrix z = tr.x[l] * tr.w[l];
            gz = activation_grad(z, gx, net.activation);
        } else {
            gz = std::move(gx);
        }
        res.dw[l] = tr.x[l].transpose() * gz;
        require_finite("gradient", res.dw[l]);
        if (l > 0) {
            gx = gz * tr.w[l].transpose();
        }
    }
    return res;
}

void check_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error("alpha must lie in [0, 1], got " + std::to_string(alpha));
    }
}

void check_views(const Network& net, const std::vector<SvdView>& views) {
    if (views.size() != net.layers.size()) {
        throw DimensionError("views: layer count mismatch");
    }
    for (std::size_t l = 0; l < views.size(); ++l) {
        const auto& layer = net.layers[l];
        const auto& v = views[l];
        if (v.p.rows() != layer.w0.rows() || v.q.cols() != layer.w0.cols() ||
            v.p.cols() != v.lambda.size() || v.q.rows() != v.lambda.size()) {
            throw DimensionError("views: shape mismatch at layer " + std::to_string(l));
        }
    }
}

} // namespace

void validate_network(const Network& net, const Batch& batch) {
    if (net.layers.empty()) {
        throw DimensionError("network has no layers");
    }
    if (batch.inputs.rows() < 1) {
        throw DimensionError("batch is empty");
    }
    Index d = batch.inputs.cols();
    for (const auto& layer : net.layers) {
        if (layer.w0.rows() != d) {
            throw DimensionError("layer input dimension mismatch");
        }
        if (layer.a.rows() != layer.w0.rows() || layer.b.cols() != layer.w0.cols() ||
            layer.a.cols() != layer.b.rows()) {
            throw DimensionError("adapter factor shape mismatch");
        }
        d = layer.w0.cols();
    }
}

std::vector<SvdView> adapter_views(const Network& net) {
    std::vector<SvdView> views;
    views.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        if (layer.rank() == 0) {
            SvdView v;
            v.p.resize(layer.w0.rows(), 0);
            v.lambda.resize(0);
            v.q.resize(0, layer.w0.cols());
            views.push_back(std::move(v));
            continue;
        }
        views.push_back(truncate(canonicalize(svd_thin(layer.a * layer.b)), layer.rank()));
    }
    return views;
}

double forward_loss(const Network& net, const Batch& batch, double alpha) {
    check_alpha(alpha);
    validate_network(net, batch);
    return forward(net, batch, alpha, delta_from_factors(net)).loss;
}

double forward_loss_views(const Network& net, const std::vector<SvdView>& views, const Batch& batch,
                          double alpha) {
    check_alpha(alpha);
    validate_network(net, batch);
    check_views(net, views);
    return forward(net, batch, alpha, delta_from_views(views)).loss;
}

BackwardResult loss_and_weight_grads(const Network& net, const Batch& batch, double alpha) {
    check_alpha(alpha);
    validate_network(net, batch);
    return backward(net, batch, alpha, delta_from_factors(net));
}

BackwardResult loss_and_weight_grads_views(const Network& net, const std::vector<SvdView>& views,
                                           const Batch& batch, double alpha) {
    check_alpha(alpha);
    validate_network(net, batch);
    check_views(net, views);
    return backward(net, batch, alpha, delta_from_views(views));
}

AbGrads grad_ab(const Network& net, const Batch& batch, double alpha) {
    BackwardResult back = loss_and_weight_grads(net, batch, alpha);
    AbGrads g;
    g.a.reserve(net.layers.size());
    g.b.reserve(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        g.a.push_back(alpha * back.dw[l] * net.layers[l].b.transpose());
        g.b.push_back(alpha * net.layers[l].a.transpose() * back.dw[l]);
    }
    return g;
}

namespace {

PqGrads pq_from_weight_grads(const std::vector<SvdView>& views, const std::vector<Matrix>& dw,
                             double scale) {
    PqGrads g;
    g.p.reserve(views.size());
    g.q.reserve(views.size());
    g.lambda.reserve(views.size());
    for (std::size_t l = 0; l < views.size(); ++l) {
        const auto& v = views[l];
        g.p.push_back(scale * dw[l] * v.q.transpose() * v.lambda.asDiagonal());
        g.q.push_back(scale * v.lambda.asDiagonal() * v.p.transpose() * dw[l]);
        g.lambda.push_back(scale * (v.p.transpose() * dw[l] * v.q.transpose()).diagonal());
    }
    return g;
}

} // namespace

PqGrads grad_pq(const Network& net, const std::vector<SvdView>& views, const Batch& batch,
                double alpha) {
    BackwardResult back = loss_and_weight_grads_views(net, views, batch, alpha);
    return pq_from_weight_grads(views, back.dw, alpha);
}

PqGrads grad_pq_at_path(const Network& net, const std::vector<SvdView>& views, const Batch& batch,
                        double alpha) {
    BackwardResult back = loss_and_weight_grads_views(net, views, batch, alpha);
    return pq_from_weight_grads(views, back.dw, 1.0);
}

AbGrads finite_diff_grad_ab(const Network& net, const Batch& batch, double alpha, double h) {
    if (h <= 0.0) {
        throw Error("finite differences require h > 0");
    }
    Network probe = net;
    AbGrads g;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto diff_matrix = [&](Matrix& m) {
            Matrix out(m.rows(), m.cols());
            for (Index i = 0; i < m.rows(); ++i) {
                for (Index j = 0; j < m.cols(); ++j) {
                    const double saved = m(i, j);
                    m(i, j) = saved + h;
                    const double up = forward_loss(probe, batch, alpha);
                    m(i, j) = saved - h;
                    const double down = forward_loss(probe, batch, alpha);
                    m(i, j) = saved;
                    out(i, j) = (up - down) / (2.0 * h);
                }
            }
            return out;
        };
        g.a.push_back(diff_matrix(probe.layers[l].a));
        g.b.push_back(diff_matrix(probe.layers[l].b));
    }
    return g;
}

PqGrads finite_diff_grad_pq(const Network& net, const std::vector<SvdView>& views,
                            const Batch& batch, double alpha, double h) {
    if (h <= 0.0) {
        throw Error("finite differences require h > 0");
    }
    std::vector<SvdView> probe = views;
    PqGrads g;
    for (std::size_t l = 0; l < views.size(); ++l) {
        auto diff_matrix = [&](Matrix& m) {
            Matrix out(m.rows(), m.cols());
            for (Index i = 0; i < m.rows(); ++i) {
                for (Index j = 0; j < m.cols(); ++j) {
                    const double saved = m(i, j);
                    m(i, j) = saved + h;
                    const double up = forward_loss_views(net, probe, batch, alpha);
                    m(i, j) = saved - h;
                    const double down = forward_loss_views(net, probe, batch, alpha);
                    m(i, j) = saved;
                    out(i, j) = (up - down) / (2.0 * h);
                }
            }
            return out;
        };
        g.p.push_back(diff_matrix(probe[l].p));
        g.q.push_back(diff_matrix(probe[l].q));
        Vector dl(views[l].lambda.size());
        for (Index i = 0; i < dl.size(); ++i) {
            const double saved = probe[l].lambda[i];
            probe[l].lambda[i] = saved + h;
            const double up = forward_loss_views(net, probe, batch, alpha);
            probe[l].lambda[i] = saved - h;
            const double down = forward_loss_views(net, probe, batch, alpha);
            probe[l].lambda[i] = saved;
            dl[i] = (up - down) / (2.0 * h);
        }
        g.lambda.push_back(std::move(dl));
    }
    return g;
}

Network default_net(std::uint64_t seed) {
    Prng root(seed);
    const std::vector<Index> dims = {16, 32, 8};
    const Index r0 = 8;

    Network net;
    net.activation = Activation::Tanh;
    net.loss = LossKind::Mse;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        AdapterLayer layer;
        layer.layer_id = static_cast<int>(l);
        const Index d1 = dims[l];
        const Index d2 = dims[l + 1];
        Prng w_rng = root.stream("w0/" + std::to_string(l));
        Prng a_rng = root.stream("a/" + std::to_string(l));
        Prng b_rng = root.stream("b/" + std::to_string(l));
        layer.w0.resize(d1, d2);
        const double w_scale = 1.0 / std::sqrt(static_cast<double>(d1));
        for (Index i = 0; i < d1; ++i) {
            for (Index j = 0; j < d2; ++j) {
                layer.w0(i, j) = w_scale * w_rng.normal();
            }
        }
        layer.a.resize(d1, r0);
        for (Index i = 0; i < d1; ++i) {
            for (Index j = 0; j < r0; ++j) {
                layer.a(i, j) = 0.2 * a_rng.normal();
            }
        }
        layer.b.resize(r0, d2);
        for (Index i = 0; i < r0; ++i) {
            for (Index j = 0; j < d2; ++j) {
                layer.b(i, j) = 0.2 * b_rng.normal();
            }
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Batch random_batch(const Network& net, int n, Prng& rng) {
    Batch batch;
    const Index d_in = net.layers.front().w0.rows();
    const Index d_out = net.layers.back().w0.cols();
    batch.inputs.resize(n, d_in);
    for (Index i = 0; i < batch.inputs.rows(); ++i) {
        for (Index j = 0; j < batch.inputs.cols(); ++j) {
            batch.inputs(i, j) = rng.normal();
        }
    }
    if (net.loss == LossKind::Mse) {
        batch.targets.resize(n, d_out);
        for (Index i = 0; i < batch.targets.rows(); ++i) {
            for (Index j = 0; j < batch.targets.cols(); ++j) {
                batch.targets(i, j) = rng.normal();
            }
        }
    } else {
        batch.targets.resize(n, 1);
        for (Index i = 0; i < batch.targets.rows(); ++i) {
            batch.targets(i, 0) = static_cast<double>(rng.below(static_cast<std::uint64_t>(d_out)));
        }
    }
    return batch;
}

} // namespace igulora
