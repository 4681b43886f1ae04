#include "spend/nnet/model.hpp"

#include <cmath>
#include <random>

#include "spend/nnet/kernels.hpp"
#include "spend/parallel.hpp"

namespace spend::nnet {

namespace {

// Runs body(i) in parallel and rethrows the first failure in index order.
template <class Body>
void parallel_checked(std::size_t n, Body&& body) {
  std::vector<std::string> errors(n);
  parallel_for(n, [&](std::size_t i) {
    try {
      body(i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
      if (errors[i].empty()) errors[i] = "unknown error";
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(e);
  }
}

template <class T>
void check_pair_shapes(const std::vector<Tensor<T>>& inputs, const std::vector<Tensor<T>>& targets) {
  if (inputs.size() != targets.size()) {
    throw Error("loss: " + std::to_string(inputs.size()) + " inputs but " +
                std::to_string(targets.size()) + " targets");
  }
  if (inputs.empty()) throw Error("loss: empty batch");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].h != targets[i].h || inputs[i].w != targets[i].w || targets[i].c != 1) {
      throw Error("loss: frame " + std::to_string(i) + " input/target shapes differ");
    }
  }
}

template <class T>
void check_output_shape(const Tensor<T>& y, const Tensor<T>& t, std::size_t frame) {
  if (y.c != t.c || y.h != t.h || y.w != t.w) {
    throw Error("loss: network output " + std::to_string(y.c) + "x" + std::to_string(y.h) + "x" +
                std::to_string(y.w) + " does not match target of frame " + std::to_string(frame));
  }
}

template <class T>
void throw_nonfinite(const Workspace<T>& ws, std::size_t frame) {
  const int layer = first_nonfinite(ws);
  if (layer >= 0) {
    throw Error("non-finite activation at layer " + std::to_string(layer) + " (frame " +
                std::to_string(frame) + ")");
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (depth < 1 || depth > 6) throw Error("model depth must be in [1, 6], got " + std::to_string(depth));
  if (base_channels < 1) throw Error("base_channels must be positive");
  if (kernel != 3) throw Error("only kernel size 3 is supported");
}

Graph build_graph(const ModelConfig& config) {
  config.validate();
  Graph g;
  const auto k = static_cast<std::size_t>(config.kernel);
  const auto base = static_cast<std::size_t>(config.base_channels);
  int x = 0;
  std::vector<int> skips;
  for (int l = 0; l < config.depth; ++l) {
    const std::size_t c = base << l;
    x = g.relu(g.conv(x, c, k));
    x = g.relu(g.conv(x, c, k));
    skips.push_back(x);
    x = g.maxpool(x);
  }
  const std::size_t cb = base << config.depth;
  x = g.relu(g.conv(x, cb, k));
  x = g.relu(g.conv(x, cb, k));
  for (int l = config.depth - 1; l >= 0; --l) {
    const std::size_t c = base << l;
    x = g.upsample(x);
    if (config.skip_connections) x = g.concat(x, skips[static_cast<std::size_t>(l)]);
    x = g.relu(g.conv(x, c, k));
    x = g.relu(g.conv(x, c, k));
  }
  g.conv(x, 1, 1);
  return g;
}

std::size_t parameter_count(const ModelConfig& config) { return build_graph(config).param_count(); }

DenoiserModel build_model(const ModelConfig& config) {
  DenoiserModel m;
  m.config = config;
  m.graph = build_graph(config);
  m.params.assign(m.graph.param_count(), 0.0f);
  std::mt19937_64 rng(config.seed);
  for (const Node& n : m.graph.nodes()) {
    if (n.op != Op::Conv) continue;
    const std::size_t fan_in = n.cin * n.kernel * n.kernel;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < n.cout * fan_in; ++i) {
      m.params[n.param_offset + i] = static_cast<float>(u(rng));
    }
  }
  return m;
}

void check_frame_shape(const ModelConfig& config, std::size_t rows, std::size_t cols) {
  const std::size_t unit = std::size_t{1} << config.depth;
  if (rows % unit || cols % unit || rows == 0 || cols == 0) {
    throw Error("frame " + std::to_string(rows) + "x" + std::to_string(cols) +
                " is not divisible by 2^depth = " + std::to_string(unit));
  }
}

template <class T>
Tensor<T> to_tensor(const Image& im) {
  Tensor<T> t(1, im.rows(), im.cols());
  const auto d = im.data();
  for (std::size_t i = 0; i < d.size(); ++i) t.v[i] = static_cast<T>(d[i]);
  return t;
}

template Tensor<float> to_tensor<float>(const Image&);
template Tensor<double> to_tensor<double>(const Image&);

Image to_image(const Tensor<float>& t) { return Image(t.h, t.w, t.v); }

std::vector<Image> forward(const DenoiserModel& model, const std::vector<Image>& frames) {
  for (const auto& f : frames) check_frame_shape(model.config, f.rows(), f.cols());
  std::vector<Image> out(frames.size());
  parallel_checked(frames.size(), [&](std::size_t i) {
    Workspace<float> ws;
    const auto& y = nnet::forward<float>(model.graph, model.params, to_tensor<float>(frames[i]), ws);
    throw_nonfinite(ws, i);
    out[i] = to_image(y);
  });
  return out;
}

template <class T>
LossGrad<T> loss_and_grad(const Graph& graph, std::span<const T> params,
                          const std::vector<Tensor<T>>& inputs,
                          const std::vector<Tensor<T>>& targets) {
  check_pair_shapes(inputs, targets);
  const std::size_t n = inputs.size(), np = graph.param_count();
  std::vector<std::vector<T>> grads(n);
  std::vector<double> losses(n);
  parallel_checked(n, [&](std::size_t i) {
    Workspace<T> ws;
    const Tensor<T>& y = forward<T>(graph, params, inputs[i], ws);
    throw_nonfinite(ws, i);
    const Tensor<T>& t = targets[i];
    check_output_shape(y, t, i);
    const double hw = static_cast<double>(t.v.size());
    Tensor<T> gy(1, t.h, t.w);
    double sse = 0;
    for (std::size_t p = 0; p < t.v.size(); ++p) {
      const double r = static_cast<double>(y.v[p]) - static_cast<double>(t.v[p]);
      sse += r * r;
      gy.v[p] = static_cast<T>(2.0 * r / (hw * static_cast<double>(n)));
    }
    losses[i] = sse / hw;
    grads[i].assign(np, T(0));
    backward<T>(graph, params, ws, gy, grads[i]);
  });
  LossGrad<T> out;
  out.grad.assign(np, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    out.loss += losses[i];
    for (std::size_t p = 0; p < np; ++p) out.grad[p] += grads[i][p];
  }
  out.loss /= static_cast<double>(n);
  return out;
}

template LossGrad<float> loss_and_grad<float>(const Graph&, std::span<const float>,
                                              const std::vector<Tensor<float>>&,
                                              const std::vector<Tensor<float>>&);
template LossGrad<double> loss_and_grad<double>(const Graph&, std::span<const double>,
                                                const std::vector<Tensor<double>>&,
                                                const std::vector<Tensor<double>>&);

LossGrad<float> loss_and_grad(const DenoiserModel& model, const std::vector<Image>& inputs,
                              const std::vector<Image>& targets) {
  std::vector<Tensor<float>> a, b;
  for (const auto& f : inputs) {
    check_frame_shape(model.config, f.rows(), f.cols());
    a.push_back(to_tensor<float>(f));
  }
  for (const auto& f : targets) b.push_back(to_tensor<float>(f));
  return loss_and_grad<float>(model.graph, model.params, a, b);
}

double batch_loss(const Graph& graph, std::span<const float> params,
                  const std::vector<Tensor<float>>& inputs,
                  const std::vector<Tensor<float>>& targets) {
  check_pair_shapes(inputs, targets);
  std::vector<double> losses(inputs.size());
  parallel_checked(inputs.size(), [&](std::size_t i) {
    Workspace<float> ws;
    const auto& y = forward<float>(graph, params, inputs[i], ws);
    check_output_shape(y, targets[i], i);
    double sse = 0;
    for (std::size_t p = 0; p < y.v.size(); ++p) {
      const double r = static_cast<double>(y.v[p]) - static_cast<double>(targets[i].v[p]);
      sse += r * r;
    }
    losses[i] = sse / static_cast<double>(y.v.size());
  });
  double total = 0;
  for (double l : losses) total += l;
  return total / static_cast<double>(inputs.size());
}

Image pad_to_multiple(const Image& im, std::size_t unit) {
  const std::size_t r = (im.rows() + unit - 1) / unit * unit;
  const std::size_t c = (im.cols() + unit - 1) / unit * unit;
  if (r == im.rows() && c == im.cols()) return im;
  Image out(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t si = reflect_index(static_cast<std::ptrdiff_t>(i), im.rows());
    for (std::size_t j = 0; j < c; ++j) {
      out(i, j) = im(si, reflect_index(static_cast<std::ptrdiff_t>(j), im.cols()));
    }
  }
  out.pixel_size_nm = im.pixel_size_nm;
  return out;
}

Image crop(const Image& im, std::size_t rows, std::size_t cols) {
  Image out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = im(i, j);
  }
  out.pixel_size_nm = im.pixel_size_nm;
  return out;
}

namespace {

Image predict_one(const DenoiserModel& model, const Image& frame) {
  const std::size_t unit = std::size_t{1} << model.config.depth;
  Image padded = pad_to_multiple(frame, unit);
  Tensor<float> t = to_tensor<float>(padded);
  const float s = model.input_scale;
  for (float& v : t.v) v /= s;
  Workspace<float> ws;
  const auto& y = forward<float>(model.graph, model.params, t, ws);
  Image out(y.h, y.w);
  auto d = out.data();
  bool finite = true;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = y.v[i] * s;
    finite = finite && std::isfinite(d[i]);
  }
  if (!finite) {
    throw_nonfinite(ws, 0);
    throw Error("non-finite prediction after output scaling");
  }
  return crop(out, frame.rows(), frame.cols());
}

}  // namespace

Image predict_frame(const DenoiserModel& model, const Image& frame) {
  return predict_one(model, frame);
}

HyperCube predict(const DenoiserModel& model, const HyperCube& cube) {
  const std::size_t n = cube.extent(model.axis);
  std::vector<Image> out(n);
  parallel_checked(n, [&](std::size_t i) {
    out[i] = predict_one(model, slice_frame(cube, model.axis, i));
  });
  HyperCube result = cube;
  for (std::size_t i = 0; i < n; ++i) put_frame(result, model.axis, i, out[i]);
  return result;
}

Image flip(const Image& im, int transform) {
  if (transform < 0 || transform > 3) throw Error("flip transform must be 0..3");
  const bool mirror_cols = transform == 1 || transform == 3;
  const bool mirror_rows = transform == 2 || transform == 3;
  const std::size_t r = im.rows(), c = im.cols();
  Image out(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out(i, j) = im(mirror_rows ? r - 1 - i : i, mirror_cols ? c - 1 - j : j);
    }
  }
  out.pixel_size_nm = im.pixel_size_nm;
  return out;
}

FramePairs frame_pairs(const permute::PairSet& pairs) {
  if (pairs.input.dims() != pairs.target.dims()) throw Error("pair stacks differ in shape");
  FramePairs fp;
  const std::size_t n = pairs.input.extent(pairs.axis);
  for (std::size_t i = 0; i < n; ++i) {
    fp.input.push_back(slice_frame(pairs.input, pairs.axis, i));
    fp.target.push_back(slice_frame(pairs.target, pairs.axis, i));
  }
  return fp;
}

FramePairs augment(const FramePairs& pairs) {
  FramePairs out;
  for (std::size_t i = 0; i < pairs.input.size(); ++i) {
    for (int t = 0; t < 4; ++t) {
      out.input.push_back(flip(pairs.input[i], t));
      out.target.push_back(flip(pairs.target[i], t));
    }
  }
  return out;
}

permute::PairSet augment(const permute::PairSet& pairs) {
  const FramePairs fp = augment(frame_pairs(pairs));
  Dims d = pairs.input.dims();
  const std::size_t m = fp.input.size();
  (pairs.axis == Axis::X ? d.nx : pairs.axis == Axis::Y ? d.ny : d.nw) = m;
  permute::PairSet out;
  out.input = HyperCube(d);
  out.target = HyperCube(d);
  for (HyperCube* c : {&out.input, &out.target}) {
    c->fast_axis = pairs.input.fast_axis;
    c->pixel_size_nm = pairs.input.pixel_size_nm;
    if (pairs.axis != Axis::W) c->wavenumbers = pairs.input.wavenumbers;
  }
  for (std::size_t i = 0; i < m; ++i) {
    put_frame(out.input, pairs.axis, i, fp.input[i]);
    put_frame(out.target, pairs.axis, i, fp.target[i]);
  }
  out.axis = pairs.axis;
  out.n_original = m;
  out.parity_dropped = false;
  return out;
}

}  // namespace spend::nnet
