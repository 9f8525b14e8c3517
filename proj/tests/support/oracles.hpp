#pragma once

// Straightforward scalar-loop reference implementations. They share no code
// with the library beyond the parameter containers, so agreement is
// evidence that the vectorized paths are right.

#include <string>
#include <vector>

#include "dialgraph/model.hpp"

namespace dialgraph::oracle {

using Grid = std::vector<std::vector<double>>;

Grid to_grid(const Matrix& m);

/// "SELF", "PAST_A_B", ... spelled out case by case.
std::string relation_label(std::size_t i, std::size_t j, Speaker si, Speaker sj);

/// Softmax over every j with |i-j| <= window of sum_ab e_i[a] W[a][b] e_j[b].
/// Row i has one entry per node; entries outside the window are 0.
Grid attention_weights(const Grid& e, const Grid& w, std::size_t window);

Grid lstm_direction(const Grid& x, const LstmParams& p, bool reverse);
Grid bilstm(const Grid& x, const BiLstmParams& p);

Grid stage1(const Grid& e, const std::vector<Speaker>& speakers, const ModelParams& params);
Grid stage2(const Grid& h1, const ModelParams& params);
double score(const Grid& raw, const std::vector<Speaker>& speakers, const ModelParams& params);

/// 1 - 6 sum d^2 / (n (n^2 - 1)) for inputs without ties.
double rank_formula_rho(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dialgraph::oracle
