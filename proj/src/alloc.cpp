#include "igulora/alloc.hpp"

#include <algorithm>
#include <cmath>

namespace igulora {

std::vector<TripletScore> triplet_scores(const std::vector<SvdView>& views,
                                         const PqField& snr_field) {
    if (snr_field.p.size() != views.size() || snr_field.q.size() != views.size()) {
        throw DimensionError("triplet_scores: layer count mismatch");
    }
    std::vector<TripletScore> scores;
    for (std::size_t l = 0; l < views.size(); ++l) {
        const auto& v = views[l];
        const Matrix& sp = snr_field.p[l];
        const Matrix& sq = snr_field.q[l];
        if (sp.rows() != v.p.rows() || sp.cols() != v.rank() || sq.rows() != v.rank() ||
            sq.cols() != v.q.cols()) {
            throw DimensionError("triplet_scores: field shape mismatch at layer " +
                                 std::to_string(l));
        }
        for (Index i = 0; i < v.rank(); ++i) {
            TripletScore s;
            s.layer_id = static_cast<int>(l);
            s.triplet_index = static_cast<int>(i);
            s.lambda_abs = std::abs(v.lambda[i]);
            s.value = s.lambda_abs + sp.col(i).mean() + sq.row(i).mean();
            if (!std::isfinite(s.value)) {
                throw NonFiniteError("triplet_scores: non-finite score");
            }
            scores.push_back(s);
        }
    }
    return scores;
}

std::vector<TripletScore> select_top_b(std::vector<TripletScore> scores, int b) {
    if (b < 1 || b > static_cast<int>(scores.size())) {
        throw Error("select_top_b: budget " + std::to_string(b) + " out of range [1, " +
                    std::to_string(scores.size()) + "]");
    }
    std::sort(scores.begin(), scores.end(), [](const TripletScore& x, const TripletScore& y) {
        if (x.value != y.value) {
            return x.value > y.value;
        }
        if (x.lambda_abs != y.lambda_abs) {
            return x.lambda_abs > y.lambda_abs;
        }
        if (x.layer_id != y.layer_id) {
            return x.layer_id < y.layer_id;
        }
        return x.triplet_index < y.triplet_index;
    });
    scores.resize(static_cast<std::size_t>(b));
    return scores;
}

AbPair prune_rebuild(const SvdView& view, const std::vector<int>& selected_local) {
    if (selected_local.empty()) {
        throw Error("prune_rebuild: empty selection");
    }
    for (const int idx : selected_local) {
        if (idx < 0 || idx >= static_cast<int>(view.rank())) {
            throw Error("prune_rebuild: triplet index out of range");
        }
        if (view.lambda[idx] < 0.0) {
            throw Error("prune_rebuild: negative singular value");
        }
    }
    const Index b_layer = static_cast<Index>(selected_local.size());
    AbPair out;
    out.a.resize(view.p.rows(), b_layer);
    out.b.resize(b_layer, view.q.cols());
    for (Index j = 0; j < b_layer; ++j) {
        const int src = selected_local[static_cast<std::size_t>(j)];
        const double root = std::sqrt(view.lambda[src]);
        out.a.col(j) = view.p.col(src) * root;
        out.b.row(j) = root * view.q.row(src);
    }
    return out;
}

void PruneSchedule::validate() const {
    if (layers < 1 || r0 < 1) {
        throw Error("schedule: layers and r0 must be >= 1");
    }
    if (b_final < 1 || b_final > b_init()) {
        throw Error("schedule: b_final must lie in [1, layers*r0]");
    }
    if (!(start_epoch < end_epoch) || !(interval > 0.0)) {
        throw Error("schedule: need start_epoch < end_epoch and interval > 0");
    }
}

int budget_at(const PruneSchedule& schedule, long global_step, int steps_per_epoch) {
    schedule.validate();
    if (steps_per_epoch < 1) {
        throw Error("budget_at: steps_per_epoch must be >= 1");
    }
    const double spe = static_cast<double>(steps_per_epoch);
    const long start_step = static_cast<long>(std::llround(schedule.start_epoch * spe));
    const long end_step = static_cast<long>(std::llround(schedule.end_epoch * spe));
    if (global_step < start_step) {
        return schedule.b_init();
    }
    if (global_step >= end_step) {
        return schedule.b_final;
    }
    const long event_stride =
        std::max<long>(1, static_cast<long>(std::ceil(schedule.interval * spe)));
    const long elapsed = ((global_step - start_step) / event_stride) * event_stride;
    const double tau =
        std::min(1.0, static_cast<double>(elapsed) / static_cast<double>(end_step - start_step));
    const double raw = static_cast<double>(schedule.b_final) +
                       static_cast<double>(schedule.b_init() - schedule.b_final) *
                           std::pow(1.0 - tau, 3);
    const long rounded = std::llround(raw);
    return static_cast<int>(
        std::clamp(rounded, static_cast<long>(schedule.b_final), static_cast<long>(schedule.b_init())));
}

} // namespace igulora
