#include "gma/learn/network.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "gma/error.hpp"
#include "gma/random.hpp"

namespace gma {
namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorConstMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Matrix to_matrix(const FeatureTensor& input) {
  return RowMajorConstMap(input.values().data(), static_cast<Eigen::Index>(input.channels()),
                          static_cast<Eigen::Index>(input.length()));
}

Eigen::Map<Matrix> as_matrix(std::span<double> block, std::size_t rows, std::size_t cols) {
  return {block.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::Map<const Matrix> as_matrix(std::span<const double> block, std::size_t rows,
                                   std::size_t cols) {
  return {block.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::Map<Vector> as_vector(std::span<double> block) {
  return {block.data(), static_cast<Eigen::Index>(block.size())};
}

Eigen::Map<const Vector> as_vector(std::span<const double> block) {
  return {block.data(), static_cast<Eigen::Index>(block.size())};
}

void fill_uniform(std::span<double> values, double limit, SplitMix64& rng) {
  for (auto& v : values) v = rng.uniform(-limit, limit);
}

double xavier_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// dL/dz of the clamped BCE at z.
double output_gradient(double z, int label) {
  const double p = sigmoid(z);
  if (p < kBceEpsilon || p > 1.0 - kBceEpsilon) return 0.0;
  return p - static_cast<double>(label);
}

std::string conv_name(std::size_t i, const char* part) {
  return "conv" + std::to_string(i) + "." + part;
}

std::string lstm_name(std::size_t l, const char* part) {
  return "lstm" + std::to_string(l) + "." + part;
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce(double p, int y) {
  const double q = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
  return y == 1 ? -std::log(q) : -std::log(1.0 - q);
}

double NeuralNet::predict(const FeatureTensor& input) const { return sigmoid(logit(input)); }

double NeuralNet::loss(const FeatureTensor& input, int label) const {
  return bce(predict(input), label);
}

const ParamBlock& NeuralNet::block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw PreconditionError("no parameter block '" + std::string(name) + "'");
}

void NeuralNet::add_block(std::string name, std::size_t size) {
  blocks_.push_back({std::move(name), params_.size(), size});
  params_.resize(params_.size() + size, 0.0);
}

std::span<double> NeuralNet::mutable_block(std::string_view name) {
  const auto& b = block(name);
  return {params_.data() + b.offset, b.size};
}

std::span<const double> NeuralNet::block_values(std::string_view name) const {
  const auto& b = block(name);
  return {params_.data() + b.offset, b.size};
}

void NeuralNet::check_input(const FeatureTensor& input) const {
  if (input.channels() != input_channels()) {
    throw PreconditionError(std::string(kind()) + ": expected " + std::to_string(input_channels()) +
                            " channels, got " + std::to_string(input.channels()));
  }
  if (input.length() < min_length()) {
    throw PreconditionError(std::string(kind()) + ": input length " +
                            std::to_string(input.length()) + " below minimum " +
                            std::to_string(min_length()));
  }
}

// ---------------------------------------------------------------------------
// 1-D CNN

namespace {

struct ConvCache {
  Matrix columns;  // (c_in * k) x L
  Matrix pre;      // c_out x L, before ReLU
  std::vector<Eigen::Index> argmax;  // c_out x L/2, column-major
  Matrix pooled;   // c_out x L/2
};

Matrix im2col(const Matrix& x, std::size_t kernel) {
  const Eigen::Index channels = x.rows();
  const Eigen::Index length = x.cols();
  const auto k = static_cast<Eigen::Index>(kernel);
  const Eigen::Index pad = k / 2;
  Matrix cols = Matrix::Zero(channels * k, length);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index shift = j - pad;
      const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
      const Eigen::Index t1 = std::min(length, length - shift);
      if (t1 > t0) cols.row(c * k + j).segment(t0, t1 - t0) = x.row(c).segment(t0 + shift, t1 - t0);
    }
  }
  return cols;
}

Matrix col2im(const Matrix& cols, Eigen::Index channels, std::size_t kernel) {
  const Eigen::Index length = cols.cols();
  const auto k = static_cast<Eigen::Index>(kernel);
  const Eigen::Index pad = k / 2;
  Matrix x = Matrix::Zero(channels, length);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index shift = j - pad;
      const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
      const Eigen::Index t1 = std::min(length, length - shift);
      if (t1 > t0) x.row(c).segment(t0 + shift, t1 - t0) += cols.row(c * k + j).segment(t0, t1 - t0);
    }
  }
  return x;
}

}  // namespace

Cnn1d::Cnn1d(CnnShape shape, std::uint64_t seed) : shape_(std::move(shape)) {
  if (shape_.input_channels == 0 || shape_.conv_channels.empty() || shape_.kernel == 0 ||
      shape_.kernel % 2 == 0 || shape_.bottleneck == 0) {
    throw PreconditionError("cnn: invalid shape");
  }
  SplitMix64 rng(seed);
  std::size_t in = shape_.input_channels;
  for (std::size_t i = 0; i < shape_.conv_channels.size(); ++i) {
    const std::size_t out = shape_.conv_channels[i];
    add_block(conv_name(i, "weight"), out * in * shape_.kernel);
    add_block(conv_name(i, "bias"), out);
    in = out;
  }
  add_block("fc1.weight", shape_.bottleneck * in);
  add_block("fc1.bias", shape_.bottleneck);
  add_block("fc2.weight", shape_.bottleneck);
  add_block("fc2.bias", 1);

  in = shape_.input_channels;
  for (std::size_t i = 0; i < shape_.conv_channels.size(); ++i) {
    const std::size_t out = shape_.conv_channels[i];
    fill_uniform(mutable_block(conv_name(i, "weight")),
                 xavier_limit(in * shape_.kernel, out * shape_.kernel), rng);
    in = out;
  }
  fill_uniform(mutable_block("fc1.weight"), xavier_limit(in, shape_.bottleneck), rng);
  fill_uniform(mutable_block("fc2.weight"), xavier_limit(shape_.bottleneck, 1), rng);
}

std::size_t Cnn1d::min_length() const { return std::size_t{1} << shape_.conv_channels.size(); }

double Cnn1d::logit(const FeatureTensor& input) const {
  check_input(input);
  Matrix x = to_matrix(input);
  std::size_t in = shape_.input_channels;
  for (std::size_t i = 0; i < shape_.conv_channels.size(); ++i) {
    const std::size_t out = shape_.conv_channels[i];
    const auto w = as_matrix(block_values(conv_name(i, "weight")), out, in * shape_.kernel);
    const auto b = as_vector(block_values(conv_name(i, "bias")));
    Matrix z = w * im2col(x, shape_.kernel);
    z.colwise() += b;
    const Eigen::Index half = z.cols() / 2;
    Matrix pooled(z.rows(), half);
    for (Eigen::Index t = 0; t < half; ++t) {
      pooled.col(t) = z.col(2 * t).cwiseMax(z.col(2 * t + 1)).cwiseMax(0.0);
    }
    x = std::move(pooled);
    in = out;
  }
  const Vector g = x.rowwise().mean();
  const auto w1 = as_matrix(block_values("fc1.weight"), shape_.bottleneck, in);
  const Vector h = (w1 * g + as_vector(block_values("fc1.bias"))).cwiseMax(0.0);
  return as_vector(block_values("fc2.weight")).dot(h) + block_values("fc2.bias")[0];
}

double Cnn1d::accumulate_gradient(const FeatureTensor& input, int label,
                                  std::span<double> gradient, double scale) const {
  check_input(input);
  if (gradient.size() != params_.size()) throw PreconditionError("cnn: gradient size mismatch");
  const std::size_t blocks = shape_.conv_channels.size();
  std::vector<ConvCache> cache(blocks);

  Matrix x = to_matrix(input);
  std::size_t in = shape_.input_channels;
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::size_t out = shape_.conv_channels[i];
    const auto w = as_matrix(block_values(conv_name(i, "weight")), out, in * shape_.kernel);
    const auto b = as_vector(block_values(conv_name(i, "bias")));
    auto& c = cache[i];
    c.columns = im2col(x, shape_.kernel);
    c.pre = w * c.columns;
    c.pre.colwise() += b;
    const Eigen::Index half = c.pre.cols() / 2;
    c.pooled.resize(c.pre.rows(), half);
    c.argmax.resize(static_cast<std::size_t>(c.pre.rows() * half));
    for (Eigen::Index t = 0; t < half; ++t) {
      for (Eigen::Index r = 0; r < c.pre.rows(); ++r) {
        const double a = std::max(c.pre(r, 2 * t), 0.0);
        const double bb = std::max(c.pre(r, 2 * t + 1), 0.0);
        const bool first = a >= bb;
        c.pooled(r, t) = first ? a : bb;
        c.argmax[static_cast<std::size_t>(t * c.pre.rows() + r)] = first ? 2 * t : 2 * t + 1;
      }
    }
    x = c.pooled;
    in = out;
  }
  const Eigen::Index last_len = x.cols();
  const Vector g = x.rowwise().mean();
  const auto w1 = as_matrix(block_values("fc1.weight"), shape_.bottleneck, in);
  const Vector h_pre = w1 * g + as_vector(block_values("fc1.bias"));
  const Vector h = h_pre.cwiseMax(0.0);
  const auto w2 = as_vector(block_values("fc2.weight"));
  const double z = w2.dot(h) + block_values("fc2.bias")[0];
  const double loss_value = bce(sigmoid(z), label);

  auto grad_of = [&](std::string_view name) {
    const auto& blk = block(name);
    return gradient.subspan(blk.offset, blk.size);
  };

  const double dz = output_gradient(z, label) * scale;
  as_vector(grad_of("fc2.weight")) += dz * h;
  grad_of("fc2.bias")[0] += dz;
  const Vector dh_pre = (dz * w2).cwiseProduct((h_pre.array() > 0.0).cast<double>().matrix());
  as_matrix(grad_of("fc1.weight"), shape_.bottleneck, in) += dh_pre * g.transpose();
  as_vector(grad_of("fc1.bias")) += dh_pre;
  const Vector dg = w1.transpose() * dh_pre;

  Matrix d_pooled = (dg / static_cast<double>(last_len)).replicate(1, last_len);
  for (std::size_t i = blocks; i-- > 0;) {
    const auto& c = cache[i];
    const std::size_t out = shape_.conv_channels[i];
    const std::size_t layer_in = i == 0 ? shape_.input_channels : shape_.conv_channels[i - 1];
    Matrix d_pre = Matrix::Zero(c.pre.rows(), c.pre.cols());
    for (Eigen::Index t = 0; t < d_pooled.cols(); ++t) {
      for (Eigen::Index r = 0; r < d_pooled.rows(); ++r) {
        const auto src = c.argmax[static_cast<std::size_t>(t * d_pooled.rows() + r)];
        if (c.pre(r, src) > 0.0) d_pre(r, src) += d_pooled(r, t);
      }
    }
    const auto w = as_matrix(block_values(conv_name(i, "weight")), out, layer_in * shape_.kernel);
    as_matrix(grad_of(conv_name(i, "weight")), out, layer_in * shape_.kernel) +=
        d_pre * c.columns.transpose();
    as_vector(grad_of(conv_name(i, "bias"))) += d_pre.rowwise().sum();
    if (i > 0) {
      d_pooled = col2im(w.transpose() * d_pre, static_cast<Eigen::Index>(layer_in), shape_.kernel);
    }
  }
  return loss_value;
}

// ---------------------------------------------------------------------------
// LSTM

namespace {

struct LstmLayerCache {
  Matrix input;  // in x L
  Matrix gates;  // 4H x L, activated (i, f, g, o)
  Matrix cell;   // H x L
  Matrix hidden; // H x L
};

}  // namespace

Lstm::Lstm(LstmShape shape, std::uint64_t seed) : shape_(shape) {
  if (shape_.input_channels == 0 || shape_.hidden == 0 || shape_.layers == 0) {
    throw PreconditionError("lstm: invalid shape");
  }
  SplitMix64 rng(seed);
  const std::size_t h = shape_.hidden;
  for (std::size_t l = 0; l < shape_.layers; ++l) {
    const std::size_t in = l == 0 ? shape_.input_channels : h;
    add_block(lstm_name(l, "input_weight"), 4 * h * in);
    add_block(lstm_name(l, "recurrent_weight"), 4 * h * h);
    add_block(lstm_name(l, "bias"), 4 * h);
  }
  add_block("head.weight", h);
  add_block("head.bias", 1);
  for (std::size_t l = 0; l < shape_.layers; ++l) {
    const std::size_t in = l == 0 ? shape_.input_channels : h;
    fill_uniform(mutable_block(lstm_name(l, "input_weight")), 1.0 / std::sqrt(double(in)), rng);
    fill_uniform(mutable_block(lstm_name(l, "recurrent_weight")), 1.0 / std::sqrt(double(h)), rng);
  }
  fill_uniform(mutable_block("head.weight"), xavier_limit(h, 1), rng);
}

namespace {

// Runs one layer over the whole sequence and records what backprop needs.
LstmLayerCache run_layer(const Matrix& input, Eigen::Map<const Matrix> w, Eigen::Map<const Matrix> u,
                         Eigen::Map<const Vector> b, Eigen::Index h) {
  LstmLayerCache c;
  const Eigen::Index length = input.cols();
  c.input = input;
  c.gates = w * input;
  c.gates.colwise() += b;
  c.cell.resize(h, length);
  c.hidden.resize(h, length);
  Vector h_prev = Vector::Zero(h);
  Vector c_prev = Vector::Zero(h);
  for (Eigen::Index t = 0; t < length; ++t) {
    auto a = c.gates.col(t);
    a.noalias() += u * h_prev;
    for (Eigen::Index r = 0; r < h; ++r) {
      a(r) = sigmoid(a(r));
      a(h + r) = sigmoid(a(h + r));
      a(2 * h + r) = std::tanh(a(2 * h + r));
      a(3 * h + r) = sigmoid(a(3 * h + r));
    }
    c_prev = a.segment(h, h).cwiseProduct(c_prev) + a.segment(0, h).cwiseProduct(a.segment(2 * h, h));
    h_prev = a.segment(3 * h, h).cwiseProduct(c_prev.array().tanh().matrix());
    c.cell.col(t) = c_prev;
    c.hidden.col(t) = h_prev;
  }
  return c;
}

}  // namespace

double Lstm::logit(const FeatureTensor& input) const {
  check_input(input);
  const auto h = static_cast<Eigen::Index>(shape_.hidden);
  Matrix x = to_matrix(input);
  for (std::size_t l = 0; l < shape_.layers; ++l) {
    const std::size_t in = l == 0 ? shape_.input_channels : shape_.hidden;
    auto layer = run_layer(x, as_matrix(block_values(lstm_name(l, "input_weight")), 4 * shape_.hidden, in),
                           as_matrix(block_values(lstm_name(l, "recurrent_weight")), 4 * shape_.hidden,
                                     shape_.hidden),
                           as_vector(block_values(lstm_name(l, "bias"))), h);
    x = std::move(layer.hidden);
  }
  return as_vector(block_values("head.weight")).dot(x.col(x.cols() - 1)) +
         block_values("head.bias")[0];
}

double Lstm::accumulate_gradient(const FeatureTensor& input, int label, std::span<double> gradient,
                                 double scale) const {
  check_input(input);
  if (gradient.size() != params_.size()) throw PreconditionError("lstm: gradient size mismatch");
  const std::size_t hs = shape_.hidden;
  const auto h = static_cast<Eigen::Index>(hs);
  const Eigen::Index length = static_cast<Eigen::Index>(input.length());

  std::vector<LstmLayerCache> cache;
  cache.reserve(shape_.layers);
  Matrix x = to_matrix(input);
  for (std::size_t l = 0; l < shape_.layers; ++l) {
    const std::size_t in = l == 0 ? shape_.input_channels : hs;
    cache.push_back(run_layer(x, as_matrix(block_values(lstm_name(l, "input_weight")), 4 * hs, in),
                              as_matrix(block_values(lstm_name(l, "recurrent_weight")), 4 * hs, hs),
                              as_vector(block_values(lstm_name(l, "bias"))), h));
    x = cache.back().hidden;
  }
  const auto head = as_vector(block_values("head.weight"));
  const Vector last = x.col(length - 1);
  const double z = head.dot(last) + block_values("head.bias")[0];
  const double loss_value = bce(sigmoid(z), label);

  auto grad_of = [&](std::string_view name) {
    const auto& blk = block(name);
    return gradient.subspan(blk.offset, blk.size);
  };

  const double dz = output_gradient(z, label) * scale;
  as_vector(grad_of("head.weight")) += dz * last;
  grad_of("head.bias")[0] += dz;

  Matrix d_hidden = Matrix::Zero(h, length);
  d_hidden.col(length - 1) = dz * head;
  for (std::size_t l = shape_.layers; l-- > 0;) {
    const auto& c = cache[l];
    const std::size_t in = l == 0 ? shape_.input_channels : hs;
    const auto w = as_matrix(block_values(lstm_name(l, "input_weight")), 4 * hs, in);
    const auto u = as_matrix(block_values(lstm_name(l, "recurrent_weight")), 4 * hs, hs);
    Matrix d_gates(4 * h, length);
    Vector dh_next = Vector::Zero(h);
    Vector dc_next = Vector::Zero(h);
    for (Eigen::Index t = length; t-- > 0;) {
      const auto gi = c.gates.col(t).segment(0, h).array();
      const auto gf = c.gates.col(t).segment(h, h).array();
      const auto gg = c.gates.col(t).segment(2 * h, h).array();
      const auto go = c.gates.col(t).segment(3 * h, h).array();
      const Eigen::ArrayXd tc = c.cell.col(t).array().tanh();
      const Eigen::ArrayXd c_prev =
          t > 0 ? Eigen::ArrayXd(c.cell.col(t - 1).array()) : Eigen::ArrayXd::Zero(h);
      const Eigen::ArrayXd dh = d_hidden.col(t).array() + dh_next.array();
      const Eigen::ArrayXd dc = dh * go * (1.0 - tc * tc) + dc_next.array();
      auto da = d_gates.col(t);
      da.segment(0, h) = (dc * gg * gi * (1.0 - gi)).matrix();
      da.segment(h, h) = (dc * c_prev * gf * (1.0 - gf)).matrix();
      da.segment(2 * h, h) = (dc * gi * (1.0 - gg * gg)).matrix();
      da.segment(3 * h, h) = (dh * tc * go * (1.0 - go)).matrix();
      dc_next = (dc * gf).matrix();
      dh_next.noalias() = u.transpose() * da;
    }
    as_matrix(grad_of(lstm_name(l, "input_weight")), 4 * hs, in) += d_gates * c.input.transpose();
    if (length > 1) {
      as_matrix(grad_of(lstm_name(l, "recurrent_weight")), 4 * hs, hs) +=
          d_gates.rightCols(length - 1) * c.hidden.leftCols(length - 1).transpose();
    }
    as_vector(grad_of(lstm_name(l, "bias"))) += d_gates.rowwise().sum();
    if (l > 0) d_hidden = w.transpose() * d_gates;
  }
  return loss_value;
}

}  // namespace gma
