#pragma once

#include "igulora/ig.hpp"
#include "igulora/linalg.hpp"

#include <vector>

namespace igulora {

struct TripletScore {
    int layer_id = 0;
    int triplet_index = 0; // position in the layer's canonical order
    double value = 0.0;    // S_i
    double lambda_abs = 0.0;
};

// S_i = |lambda_i| + mean_k snr(P_ki) + mean_k snr(Q_ik), per layer.
std::vector<TripletScore> triplet_scores(const std::vector<SvdView>& views,
                                         const PqField& snr_field);

// The b highest-scoring triplets across all layers. Ties break on larger
// |lambda|, then lower layer_id, then lower triplet_index.
std::vector<TripletScore> select_top_b(std::vector<TripletScore> scores, int b);

struct AbPair {
    Matrix a;
    Matrix b;
};

// a = P_sel diag(lambda_sel)^{1/2}, b = diag(lambda_sel)^{1/2} Q_sel.
AbPair prune_rebuild(const SvdView& view, const std::vector<int>& selected_local);

struct PruneSchedule {
    int layers = 2;
    int r0 = 8;            // initial rank per layer
    int b_final = 8;       // final total triplet budget
    double start_epoch = 2.0;
    double end_epoch = 5.0;
    double interval = 0.2; // fraction of an epoch between prune boundaries
    // Accepted for config fidelity; the desk-scale schedule is driven by
    // start/end/interval and the cubic decay alone.
    double gamma = 0.1;
    double t_i = 500.0;
    double delta_t = 20.0;
    double t_f = 10000.0;

    int b_init() const { return layers * r0; }
    void validate() const;
};

// Total budget at a global step: b_init before the window, b_final after,
// and B_final + (B_init - B_final) (1 - tau)^3 inside, with tau quantized
// to the prune boundaries. Monotone non-increasing.
int budget_at(const PruneSchedule& schedule, long global_step, int steps_per_epoch);

} // namespace igulora
