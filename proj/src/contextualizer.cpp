#include <algorithm>
#include <cmath>
#include <numeric>

#include "dialgraph/encode.hpp"

namespace dialgraph {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

LstmParams make_lstm(Eigen::Index in, Eigen::Index hidden) {
  return {Matrix::Zero(4 * hidden, in), Matrix::Zero(4 * hidden, hidden), Vector::Zero(4 * hidden)};
}

void run_lstm(const Matrix& x, const LstmParams& p, bool reverse, LstmTrace& tr) {
  const Eigen::Index n = x.rows();
  const Eigen::Index h = p.recurrent_weight.cols();
  tr.order.resize(static_cast<std::size_t>(n));
  std::iota(tr.order.begin(), tr.order.end(), std::size_t{0});
  if (reverse) std::reverse(tr.order.begin(), tr.order.end());
  tr.gates.resize(n, 4 * h);
  tr.cells.resize(n, h);
  tr.hidden.resize(n, h);

  Vector h_prev = Vector::Zero(h), c_prev = Vector::Zero(h);
  for (auto ti : tr.order) {
    const auto t = static_cast<Eigen::Index>(ti);
    Vector z = p.input_weight * x.row(t).transpose() + p.recurrent_weight * h_prev + p.bias;
    for (Eigen::Index k = 0; k < h; ++k) {
      z[k] = sigmoid(z[k]);                  // input
      z[h + k] = sigmoid(z[h + k]);          // forget
      z[2 * h + k] = std::tanh(z[2 * h + k]);  // cell candidate
      z[3 * h + k] = sigmoid(z[3 * h + k]);  // output
    }
    Vector c = z.segment(h, h).cwiseProduct(c_prev) + z.head(h).cwiseProduct(z.segment(2 * h, h));
    Vector hv = z.tail(h).cwiseProduct(c.array().tanh().matrix());
    tr.gates.row(t) = z.transpose();
    tr.cells.row(t) = c.transpose();
    tr.hidden.row(t) = hv.transpose();
    h_prev = std::move(hv);
    c_prev = std::move(c);
  }
}

void lstm_backward(const Matrix& x, const LstmParams& p, const LstmTrace& tr, const Matrix& d_hidden,
                   LstmParams& g, Matrix* d_x) {
  const Eigen::Index h = p.recurrent_weight.cols();
  Vector dh_next = Vector::Zero(h), dc_next = Vector::Zero(h);
  Vector dz(4 * h);
  for (std::size_t k = tr.order.size(); k-- > 0;) {
    const auto t = static_cast<Eigen::Index>(tr.order[k]);
    const bool has_prev = k > 0;
    const auto prev = has_prev ? static_cast<Eigen::Index>(tr.order[k - 1]) : 0;
    const auto gates = tr.gates.row(t);
    for (Eigen::Index j = 0; j < h; ++j) {
      const double i = gates[j], f = gates[h + j], gc = gates[2 * h + j], o = gates[3 * h + j];
      const double tc = std::tanh(tr.cells(t, j));
      const double c_prev = has_prev ? tr.cells(prev, j) : 0.0;
      const double dh = d_hidden(t, j) + dh_next[j];
      const double d_o = dh * tc;
      const double dc = dh * o * (1.0 - tc * tc) + dc_next[j];
      dz[j] = dc * gc * i * (1.0 - i);
      dz[h + j] = dc * c_prev * f * (1.0 - f);
      dz[2 * h + j] = dc * i * (1.0 - gc * gc);
      dz[3 * h + j] = d_o * o * (1.0 - o);
      dc_next[j] = dc * f;
    }
    g.input_weight.noalias() += dz * x.row(t);
    if (has_prev) g.recurrent_weight.noalias() += dz * tr.hidden.row(prev);
    g.bias += dz;
    dh_next.noalias() = p.recurrent_weight.transpose() * dz;
    if (d_x) d_x->row(t).noalias() += (p.input_weight.transpose() * dz).transpose();
  }
}

}  // namespace

BiLstmParams make_bilstm(std::size_t dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("contextualizer width must be even and >= 2");
  const auto d = static_cast<Eigen::Index>(dim);
  return {make_lstm(d, d / 2), make_lstm(d, d / 2)};
}

Matrix contextualize(const Matrix& raw, const BiLstmParams& params, BiLstmTrace* trace) {
  if (!raw.allFinite()) throw std::domain_error("contextualize: non-finite input");
  BiLstmTrace local;
  BiLstmTrace& tr = trace ? *trace : local;
  run_lstm(raw, params.forward, false, tr.forward);
  run_lstm(raw, params.backward, true, tr.backward);
  Matrix out(raw.rows(), tr.forward.hidden.cols() + tr.backward.hidden.cols());
  out << tr.forward.hidden, tr.backward.hidden;
  if (!out.allFinite()) throw std::domain_error("contextualize: NaN/Inf in output (diverged parameters?)");
  if (trace) tr.input = raw;
  return out;
}

void contextualize_backward(const BiLstmTrace& trace, const BiLstmParams& params, const Matrix& d_context,
                            BiLstmParams& grads, Matrix* d_raw) {
  const Eigen::Index h = trace.forward.hidden.cols();
  if (d_raw) *d_raw = Matrix::Zero(trace.input.rows(), trace.input.cols());
  lstm_backward(trace.input, params.forward, trace.forward, d_context.leftCols(h), grads.forward, d_raw);
  lstm_backward(trace.input, params.backward, trace.backward, d_context.rightCols(h), grads.backward, d_raw);
}

}  // namespace dialgraph
