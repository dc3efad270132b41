#include "igulora/score.hpp"

#include <algorithm>
#include <cmath>

namespace igulora {

namespace {

void require_nonnegative_scores(const PqField& f) {
    for (const auto& m : f.p) {
        require_finite("score field", m);
        if (m.size() > 0 && m.minCoeff() < 0.0) {
            throw Error("score field: negative entry");
        }
    }
    for (const auto& m : f.q) {
        require_finite("score field", m);
        if (m.size() > 0 && m.minCoeff() < 0.0) {
            throw Error("score field: negative entry");
        }
    }
}

} // namespace

void update(ImportanceState& state, const PqField& s_agg) {
    require_nonnegative_scores(s_agg);
    if (state.t == 0) {
        state.s_bar = s_agg;
        state.u_bar = s_agg;
        for (auto& m : state.u_bar.p) {
            m.setZero();
        }
        for (auto& m : state.u_bar.q) {
            m.setZero();
        }
        state.t = 1;
        return;
    }
    if (!state.s_bar.same_shape(s_agg)) {
        throw DimensionError("ImportanceState update: shape mismatch (re-index after pruning)");
    }
    for (std::size_t l = 0; l < s_agg.p.size(); ++l) {
        auto smooth = [&](Matrix& s_bar, Matrix& u_bar, const Matrix& obs) {
            const Matrix prior = s_bar;
            s_bar = state.beta1 * s_bar + (1.0 - state.beta1) * obs;
            const Matrix& reference = state.deviation_uses_prior_mean ? prior : s_bar;
            u_bar = state.beta2 * u_bar + (1.0 - state.beta2) * (obs - reference).cwiseAbs();
        };
        smooth(state.s_bar.p[l], state.u_bar.p[l], s_agg.p[l]);
        smooth(state.s_bar.q[l], state.u_bar.q[l], s_agg.q[l]);
    }
    ++state.t;
}

PqField snr(const ImportanceState& state) {
    PqField out = state.s_bar;
    for (std::size_t l = 0; l < out.p.size(); ++l) {
        out.p[l] = (state.s_bar.p[l].array() / (state.u_bar.p[l].array() + state.epsilon)).matrix();
        out.q[l] = (state.s_bar.q[l].array() / (state.u_bar.q[l].array() + state.epsilon)).matrix();
    }
    return out;
}

void reindex(ImportanceState& state, const std::vector<std::vector<int>>& keep_per_layer) {
    if (keep_per_layer.size() != state.s_bar.p.size()) {
        throw DimensionError("reindex: layer count mismatch");
    }
    auto select = [](const Matrix& m, const std::vector<int>& keep, bool columns) {
        Matrix out(columns ? m.rows() : static_cast<Index>(keep.size()),
                   columns ? static_cast<Index>(keep.size()) : m.cols());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            if (columns) {
                out.col(static_cast<Index>(i)) = m.col(keep[i]);
            } else {
                out.row(static_cast<Index>(i)) = m.row(keep[i]);
            }
        }
        return out;
    };
    for (std::size_t l = 0; l < keep_per_layer.size(); ++l) {
        const auto& keep = keep_per_layer[l];
        state.s_bar.p[l] = select(state.s_bar.p[l], keep, true);
        state.u_bar.p[l] = select(state.u_bar.p[l], keep, true);
        state.s_bar.q[l] = select(state.s_bar.q[l], keep, false);
        state.u_bar.q[l] = select(state.u_bar.q[l], keep, false);
    }
}

double effective_window(double beta) {
    if (!(beta >= 0.0 && beta < 1.0)) {
        throw Error("effective_window: beta must lie in [0, 1)");
    }
    return (1.0 + beta) / (1.0 - beta);
}

BurnIn burn_in(double beta_min, double delta, double c1, double c2) {
    if (!(beta_min >= 0.0 && beta_min < 1.0) || !(delta > 0.0 && delta < 1.0) || c1 <= 0.0 ||
        c2 <= 0.0) {
        throw Error("burn_in: invalid arguments");
    }
    const double log_term = std::log(c2 / delta);
    if (log_term <= 0.0) {
        return {1, true};
    }
    return {static_cast<long>(std::ceil(c1 / (1.0 - beta_min) * log_term)), false};
}

namespace {

PqField scalar_field(double value) {
    PqField f;
    f.p.push_back(Matrix::Constant(1, 1, value));
    f.q.push_back(Matrix(0, 0));
    return f;
}

double truncated_normal(Prng& rng, double mu, double sigma) {
    for (;;) {
        const double y = mu + sigma * rng.normal();
        if (y >= 0.0) {
            return y;
        }
    }
}

double median_of(std::vector<double> values) {
    if (values.empty()) {
        return 0.0;
    }
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    double upper = values[mid];
    if (values.size() % 2 == 1) {
        return upper;
    }
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid) - 1,
                     values.end());
    return 0.5 * (upper + values[mid - 1]);
}

} // namespace

SnrSimResult snr_simulate(const SnrSimConfig& cfg, std::uint64_t seed) {
    if (cfg.replications < 50) {
        throw Error("snr_simulate: need at least 50 replications");
    }
    if (!(cfg.mu > 0.0) || cfg.sigma < 0.0) {
        throw Error("snr_simulate: mu must be positive and sigma non-negative");
    }
    SnrSimResult res;
    res.beta = cfg.beta;
    res.n_eff = effective_window(cfg.beta);
    const BurnIn burn = burn_in(cfg.beta, cfg.delta, cfg.c1, cfg.c2);
    res.t_burn = burn.steps;

    const int steps = cfg.steps > 0 ? cfg.steps : static_cast<int>(burn.steps) + 160;
    if (steps < burn.steps) {
        throw Error("snr_simulate: steps fall short of the burn-in length");
    }

    Prng root(seed);

    // d = E|y - mu| estimated by Monte-Carlo on its own stream.
    Prng oracle = root.stream("oracle");
    const int oracle_samples = 1000000;
    double d_acc = 0.0;
    for (int i = 0; i < oracle_samples; ++i) {
        d_acc += std::abs(truncated_normal(oracle, cfg.mu, cfg.sigma) - cfg.mu);
    }
    res.d_hat = d_acc / static_cast<double>(oracle_samples);
    if (res.d_hat < 1e-9) {
        res.degenerate = true;
        return res;
    }
    res.target = cfg.mu / res.d_hat;
    const double big_c = 2.0 * std::sqrt(2.0) * cfg.sigma / res.d_hat +
                         2.0 * cfg.c0 * cfg.mu / (res.d_hat * res.d_hat) * (cfg.sigma + res.d_hat);
    res.bound = big_c * std::sqrt(std::log(2.0 / cfg.delta) / res.n_eff);

    std::vector<double> post_devs;
    std::vector<double> post_devs_noeps;
    int covered = 0;
    for (int r = 0; r < cfg.replications; ++r) {
        Prng rng = root.stream("rep/" + std::to_string(r));
        ImportanceState state;
        state.beta1 = cfg.beta;
        state.beta2 = cfg.beta;
        state.epsilon = cfg.epsilon;
        double last_dev = 0.0;
        for (int t = 1; t <= steps; ++t) {
            const double y = truncated_normal(rng, cfg.mu, cfg.sigma);
            update(state, scalar_field(y));
            const double s_bar = state.s_bar.p[0](0, 0);
            const double u_bar = state.u_bar.p[0](0, 0);
            const double value = s_bar / (u_bar + cfg.epsilon);
            const double dev = std::abs(value - res.target);
            res.rows.push_back({r, t, value, dev});
            if (t > burn.steps) {
                post_devs.push_back(dev);
                if (u_bar > 0.0) {
                    post_devs_noeps.push_back(std::abs(s_bar / u_bar - res.target));
                }
            }
            last_dev = dev;
        }
        if (last_dev <= res.bound) {
            ++covered;
        }
    }
    res.median_deviation = median_of(std::move(post_devs));
    res.median_deviation_noeps = median_of(std::move(post_devs_noeps));
    res.coverage = static_cast<double>(covered) / static_cast<double>(cfg.replications);
    return res;
}

} // namespace igulora
