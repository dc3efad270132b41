#pragma once

#include "igulora/model.hpp"
#include "igulora/prng.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace igulora {

struct Dataset {
    Matrix train_x, train_y;
    Matrix val_x, val_y;
    Matrix test_x, test_y;
    Index input_dim = 0;
    Index output_dim = 0;
    std::string provenance;
};

// Teacher-student task with known per-layer update ranks: the teacher shares
// the student's frozen base weights and adds a rank-k update of unit
// Frobenius norm per layer, so the rank a layer "needs" is planted.
struct PlantedSpec {
    std::vector<int> layer_dims = {16, 32, 8};
    std::vector<int> teacher_ranks = {6, 2};
    double noise_std = 0.01;
    int n_train = 2048;
    int n_val = 256;
    int n_test = 256;
    std::uint64_t seed = 1;
};

std::pair<Dataset, Network> gen_planted(const PlantedSpec& spec);

// Fresh student: teacher's frozen base weights with rank-r0 adapters
// (a small random, b zero).
Network make_student(const Network& teacher, int r0, Prng& rng);

struct CsvSchema {
    Index input_dim = 0;
    Index output_dim = 0;
    double f_train = 0.8;
    double f_val = 0.1;
    std::uint64_t seed = 1;
};

// Header x0..x{d-1},y0..; rows split into train/val/test by seeded hash
// order with exact split counts.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

} // namespace igulora
