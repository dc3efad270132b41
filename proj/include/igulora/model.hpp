#pragma once

#include "igulora/linalg.hpp"
#include "igulora/prng.hpp"
#include "igulora/types.hpp"

#include <cstdint>
#include <vector>

namespace igulora {

enum class Activation { Tanh, Relu };
enum class LossKind { Mse, SoftmaxCe };

// Frozen base weight plus trainable low-rank factors; the layer's effective
// weight at path position alpha is w0 + alpha * a * b.
struct AdapterLayer {
    Matrix w0; // d1 x d2, frozen
    Matrix a;  // d1 x r
    Matrix b;  // r x d2
    int layer_id = 0;

    Index rank() const { return a.cols(); }
};

// Adapted linear layers with a fixed activation between consecutive layers
// (none after the last) and a scalar loss on the final output.
struct Network {
    std::vector<AdapterLayer> layers;
    Activation activation = Activation::Tanh;
    LossKind loss = LossKind::Mse;
};

struct Batch {
    Matrix inputs;  // batch x d_in
    Matrix targets; // batch x d_out, or batch x 1 class indices for SoftmaxCe
};

void validate_network(const Network& net, const Batch& batch);

// Canonical truncated SVD view of each layer's adapter product a*b.
std::vector<SvdView> adapter_views(const Network& net);

double forward_loss(const Network& net, const Batch& batch, double alpha);

// Forward pass with the adapter contribution taken from explicit views
// (alpha * p diag(lambda) q) instead of the stored factors.
double forward_loss_views(const Network& net, const std::vector<SvdView>& views, const Batch& batch,
                          double alpha);

struct AbGrads {
    std::vector<Matrix> a; // dL/dA per layer
    std::vector<Matrix> b; // dL/dB per layer
};

struct PqGrads {
    std::vector<Matrix> p;      // dL/dP per layer (lambda held constant)
    std::vector<Matrix> q;      // dL/dQ per layer
    std::vector<Vector> lambda; // dL/dlambda per layer (completeness only)
};

struct BackwardResult {
    double loss = 0.0;
    std::vector<Matrix> dw; // dL/dW_eff per layer, at the path point
};

// One reverse pass; everything else composes from dw by the chain rule.
BackwardResult loss_and_weight_grads(const Network& net, const Batch& batch, double alpha);
BackwardResult loss_and_weight_grads_views(const Network& net, const std::vector<SvdView>& views,
                                           const Batch& batch, double alpha);

AbGrads grad_ab(const Network& net, const Batch& batch, double alpha);

PqGrads grad_pq(const Network& net, const std::vector<SvdView>& views, const Batch& batch,
                double alpha);

// dL/dW_eff and dL/dP etc. without the path chain factor alpha; the
// completeness check needs gradients of the factor parameters at the path
// point rather than of the scaled contribution.
PqGrads grad_pq_at_path(const Network& net, const std::vector<SvdView>& views, const Batch& batch,
                        double alpha);

AbGrads finite_diff_grad_ab(const Network& net, const Batch& batch, double alpha, double h);
PqGrads finite_diff_grad_pq(const Network& net, const std::vector<SvdView>& views,
                            const Batch& batch, double alpha, double h);

// Shared fixture: 16 -> adapted 16x32 -> tanh -> adapted 32x8 -> MSE,
// rank-8 adapters with small random factors.
Network default_net(std::uint64_t seed);
Batch random_batch(const Network& net, int n, Prng& rng);

} // namespace igulora
