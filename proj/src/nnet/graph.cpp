#include "spend/nnet/graph.hpp"

#include <algorithm>
#include <cmath>

#include "spend/cube.hpp"
#include "spend/nnet/kernels.hpp"

namespace spend::nnet {

Graph::Graph() {
  Node in;
  in.channels = 1;
  nodes_.push_back(in);
  depth_.push_back(0);
}

int Graph::push(Node n) {
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::conv(int from, std::size_t cout, std::size_t kernel) {
  if (kernel != 1 && kernel != 3) throw Error("conv kernel must be 1 or 3");
  if (cout == 0) throw Error("conv needs at least one output channel");
  Node n;
  n.op = Op::Conv;
  n.a = from;
  n.cin = nodes_.at(from).channels;
  n.cout = cout;
  n.kernel = kernel;
  n.channels = cout;
  n.param_offset = params_;
  params_ += cout * n.cin * kernel * kernel + cout;
  depth_.push_back(depth_.at(from));
  return push(n);
}

int Graph::relu(int from) {
  Node n;
  n.op = Op::Relu;
  n.a = from;
  n.channels = nodes_.at(from).channels;
  depth_.push_back(depth_.at(from));
  return push(n);
}

int Graph::maxpool(int from) {
  Node n;
  n.op = Op::MaxPool;
  n.a = from;
  n.channels = nodes_.at(from).channels;
  depth_.push_back(depth_.at(from) + 1);
  levels_ = std::max(levels_, depth_.back());
  return push(n);
}

int Graph::upsample(int from) {
  Node n;
  n.op = Op::Upsample;
  n.a = from;
  n.channels = nodes_.at(from).channels;
  depth_.push_back(depth_.at(from) - 1);
  return push(n);
}

int Graph::concat(int first, int second) {
  if (depth_.at(first) != depth_.at(second)) throw Error("concat of mismatched resolutions");
  Node n;
  n.op = Op::Concat;
  n.a = first;
  n.b = second;
  n.channels = nodes_.at(first).channels + nodes_.at(second).channels;
  depth_.push_back(depth_.at(first));
  return push(n);
}

std::string Graph::describe() const {
  std::string s;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    s += std::to_string(i) + ": ";
    switch (n.op) {
      case Op::Input: s += "input 1ch"; break;
      case Op::Conv:
        s += "conv" + std::to_string(n.kernel) + "x" + std::to_string(n.kernel) + " " +
             std::to_string(n.cin) + "->" + std::to_string(n.cout);
        break;
      case Op::Relu: s += "relu"; break;
      case Op::MaxPool: s += "maxpool2"; break;
      case Op::Upsample: s += "upsample2"; break;
      case Op::Concat: s += "concat " + std::to_string(n.a) + "+" + std::to_string(n.b); break;
    }
    s += "\n";
  }
  return s;
}

template <class T>
const Tensor<T>& forward(const Graph& g, std::span<const T> params, const Tensor<T>& input,
                         Workspace<T>& ws) {
  const auto& nodes = g.nodes();
  if (params.size() != g.param_count()) {
    throw Error("parameter vector has " + std::to_string(params.size()) + " entries, graph needs " +
                std::to_string(g.param_count()));
  }
  if (input.c != 1) throw Error("network input must have one channel");
  const std::size_t unit = std::size_t{1} << g.levels();
  if (input.h % unit || input.w % unit) {
    throw Error("frame " + std::to_string(input.h) + "x" + std::to_string(input.w) +
                " is not divisible by " + std::to_string(unit));
  }
  ws.act.resize(nodes.size());
  ws.pool_arg.resize(nodes.size());
  ws.act[0] = input;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    const Tensor<T>& a = ws.act[n.a];
    Tensor<T>& out = ws.act[i];
    switch (n.op) {
      case Op::Conv: {
        const std::size_t nw = n.cout * n.cin * n.kernel * n.kernel;
        kernels::conv_forward<T>(a, params.subspan(n.param_offset, nw),
                                 params.subspan(n.param_offset + nw, n.cout), n.kernel, n.cout,
                                 out);
        break;
      }
      case Op::Relu: kernels::relu_forward(a, out); break;
      case Op::MaxPool: kernels::maxpool_forward(a, out, ws.pool_arg[i]); break;
      case Op::Upsample: kernels::upsample_forward(a, out); break;
      case Op::Concat: {
        const Tensor<T>& b = ws.act[n.b];
        out.resize(a.c + b.c, a.h, a.w);
        std::copy(a.v.begin(), a.v.end(), out.v.begin());
        std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
        break;
      }
      case Op::Input: break;
    }
  }
  return ws.act.back();
}

template <class T>
void backward(const Graph& g, std::span<const T> params, Workspace<T>& ws,
              const Tensor<T>& grad_output, std::span<T> grad_params) {
  const auto& nodes = g.nodes();
  ws.grad.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    ws.grad[i].resize(ws.act[i].c, ws.act[i].h, ws.act[i].w);
  }
  ws.grad.back().v = grad_output.v;
  for (std::size_t i = nodes.size() - 1; i >= 1; --i) {
    const Node& n = nodes[i];
    const Tensor<T>& go = ws.grad[i];
    Tensor<T>& ga = ws.grad[n.a];
    switch (n.op) {
      case Op::Conv: {
        const std::size_t nw = n.cout * n.cin * n.kernel * n.kernel;
        // The input image needs no gradient.
        Tensor<T>* gin = n.a == 0 ? nullptr : &ga;
        kernels::conv_backward<T>(ws.act[n.a], params.subspan(n.param_offset, nw), go, n.kernel,
                                  gin, grad_params.subspan(n.param_offset, nw),
                                  grad_params.subspan(n.param_offset + nw, n.cout));
        break;
      }
      case Op::Relu: kernels::relu_backward(ws.act[n.a], go, ga); break;
      case Op::MaxPool: kernels::maxpool_backward(go, ws.pool_arg[i], ga); break;
      case Op::Upsample: kernels::upsample_backward(go, ga); break;
      case Op::Concat: {
        Tensor<T>& gb = ws.grad[n.b];
        const std::size_t na = ga.v.size();
        for (std::size_t t = 0; t < na; ++t) ga.v[t] += go.v[t];
        for (std::size_t t = 0; t < gb.v.size(); ++t) gb.v[t] += go.v[na + t];
        break;
      }
      case Op::Input: break;
    }
  }
}

template <class T>
int first_nonfinite(const Workspace<T>& ws) {
  for (std::size_t i = 0; i < ws.act.size(); ++i) {
    for (T v : ws.act[i].v) {
      if (!std::isfinite(v)) return static_cast<int>(i);
    }
  }
  return -1;
}

template const Tensor<float>& forward<float>(const Graph&, std::span<const float>,
                                             const Tensor<float>&, Workspace<float>&);
template const Tensor<double>& forward<double>(const Graph&, std::span<const double>,
                                               const Tensor<double>&, Workspace<double>&);
template void backward<float>(const Graph&, std::span<const float>, Workspace<float>&,
                              const Tensor<float>&, std::span<float>);
template void backward<double>(const Graph&, std::span<const double>, Workspace<double>&,
                               const Tensor<double>&, std::span<double>);
template int first_nonfinite<float>(const Workspace<float>&);
template int first_nonfinite<double>(const Workspace<double>&);

}  // namespace spend::nnet
