#pragma once

#include "igulora/ig.hpp"
#include "igulora/prng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace igulora {

// EMA-smoothed sensitivity and deviation per P/Q entry. The first update
// seeds s_bar with the observed score (and u_bar with zero) instead of
// starting from zeros, so early epochs are not biased toward 0.
struct ImportanceState {
    PqField s_bar;
    PqField u_bar;
    long t = 0;
    double beta1 = 0.85;
    double beta2 = 0.85;
    double epsilon = 1e-6;
    // Deviation tracker variant: measure |s_agg - s_bar^(t-1)| instead of
    // the written-as-published |s_agg - s_bar^(t)|.
    bool deviation_uses_prior_mean = false;
};

void update(ImportanceState& state, const PqField& s_agg);

// Entrywise s_bar / (u_bar + epsilon).
PqField snr(const ImportanceState& state);

// Drop pruned triplets: keep the listed columns of the P-shaped fields and
// rows of the Q-shaped fields, preserving EMA history of survivors.
void reindex(ImportanceState& state, const std::vector<std::vector<int>>& keep_per_layer);

// (1 + beta) / (1 - beta)
double effective_window(double beta);

struct BurnIn {
    long steps = 1;
    bool flagged = false; // delta >= c2 would make the log non-positive
};

// ceil(c1 / (1 - beta_min) * log(c2 / delta))
BurnIn burn_in(double beta_min, double delta, double c1, double c2);

struct SnrSimConfig {
    double mu = 1.0;
    double sigma = 0.2;
    double beta = 0.85; // used for both beta1 and beta2
    int steps = 0;      // 0: burn-in plus a default observation window
    int replications = 200;
    double delta = 0.05;
    double c1 = 2.0;
    double c2 = 2.0;
    double c0 = 1.0;
    double epsilon = 1e-6;
};

struct SnrSimRow {
    int replication = 0;
    int t = 0;
    double snr = 0.0;
    double deviation = 0.0;
};

struct SnrSimResult {
    double beta = 0.0;
    double n_eff = 0.0;
    long t_burn = 0;
    double d_hat = 0.0;     // Monte-Carlo estimate of E|y - mu|
    double target = 0.0;    // mu / d_hat
    double bound = 0.0;     // C sqrt(log(2/delta) / n_eff), c0 = 1 default
    bool degenerate = false;
    double median_deviation = 0.0;        // post-burn-in, epsilon-guarded SNR
    double median_deviation_noeps = 0.0;  // post-burn-in, raw s_bar/u_bar
    double coverage = 0.0;                // final-step deviations within bound
    std::vector<SnrSimRow> rows;
};

// Streams i.i.d. y_t ~ Normal(mu, sigma^2) truncated at 0 through the EMA
// update and reports how the SNR score concentrates around mu/d.
SnrSimResult snr_simulate(const SnrSimConfig& cfg, std::uint64_t seed);

} // namespace igulora
