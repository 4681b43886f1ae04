#include "doctest.h"
#include "spend/nnet/graph.hpp"
#include "spend/nnet/kernels.hpp"
#include "spend/nnet/model.hpp"
#include "spend/parallel.hpp"
#include "support.hpp"

using namespace spend;
using namespace spend::nnet;

namespace {

template <class T>
Tensor<T> random_tensor(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed,
                        double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(c, h, w);
  for (auto& v : t.v) v = static_cast<T>(u(rng));
  return t;
}

template <class T>
std::vector<T> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(u(rng));
  return v;
}

template <class T>
double max_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

// Hand count of the encoder-decoder layer table.
std::size_t closed_form_parameters(std::size_t depth, std::size_t base) {
  const auto conv = [](std::size_t cin, std::size_t cout, std::size_t k) {
    return cout * cin * k * k + cout;
  };
  std::size_t n = 0, cin = 1;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t c = base << l;
    n += conv(cin, c, 3) + conv(c, c, 3);
    cin = c;
  }
  const std::size_t cb = base << depth;
  n += conv(cin, cb, 3) + conv(cb, cb, 3);
  std::size_t below = cb;
  for (std::size_t l = depth; l-- > 0;) {
    const std::size_t c = base << l;
    n += conv(below + c, c, 3) + conv(c, c, 3);
    below = c;
  }
  return n + conv(base, 1, 1);
}

// Every conv copies one input channel through its centre tap into output
// channel 0; after a concatenation it reads the skip half.
void make_identity(DenoiserModel& m) {
  std::fill(m.params.begin(), m.params.end(), 0.0f);
  const auto& nodes = m.graph.nodes();
  for (const Node& n : nodes) {
    if (n.op != Op::Conv) continue;
    const Node& src = nodes[static_cast<std::size_t>(n.a)];
    const std::size_t in = src.op == Op::Concat ? nodes[static_cast<std::size_t>(src.a)].channels : 0;
    const std::size_t kk = n.kernel * n.kernel;
    m.params[n.param_offset + in * kk + kk / 2] = 1.0f;
  }
}

// Replaces each spatial kernel K by (K + rot180(K)) / 2.
void symmetrize(DenoiserModel& m) {
  for (const Node& n : m.graph.nodes()) {
    if (n.op != Op::Conv || n.kernel != 3) continue;
    for (std::size_t f = 0; f < n.cout * n.cin; ++f) {
      float* k = m.params.data() + n.param_offset + f * 9;
      for (int i = 0; i < 4; ++i) {
        const float s = 0.5f * (k[i] + k[8 - i]);
        k[i] = k[8 - i] = s;
      }
    }
  }
}

Image rot180(const Image& im) { return flip(im, 3); }

// Loss as a function of the parameters, for central differences.
double loss_at(const Graph& g, const std::vector<double>& p, const std::vector<Tensor<double>>& in,
               const std::vector<Tensor<double>>& tg) {
  return loss_and_grad<double>(g, p, in, tg).loss;
}

double gradient_error(const Graph& g, std::uint64_t seed, std::size_t h = 8, std::size_t w = 8,
                      std::size_t frames = 2) {
  std::vector<double> p = random_vector<double>(g.param_count(), seed, 0.5);
  std::vector<Tensor<double>> in, tg;
  for (std::size_t i = 0; i < frames; ++i) {
    in.push_back(random_tensor<double>(1, h, w, seed * 31 + i));
    tg.push_back(random_tensor<double>(g.output_channels(), h, w, seed * 37 + i));
  }
  const auto lg = loss_and_grad<double>(g, p, in, tg);
  const double step = 1e-5;
  double worst = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + step;
    const double up = loss_at(g, p, in, tg);
    p[i] = keep - step;
    const double down = loss_at(g, p, in, tg);
    p[i] = keep;
    const double fd = (up - down) / (2 * step);
    const double denom = std::max({std::abs(fd), std::abs(lg.grad[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - lg.grad[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("reflect_index mirrors without repeating the edge") {
  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(-2, 5) == 2);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(6, 5) == 2);
  CHECK(reflect_index(2, 5) == 2);
  CHECK(reflect_index(-1, 2) == 1);
  CHECK(reflect_index(2, 2) == 0);
  CHECK(reflect_index(-1, 1) == 0);
}

TEST_CASE_TEMPLATE("optimized convolution matches the reference loops", T, float, double) {
  const double tol = std::is_same_v<T, float> ? 2e-5 : 1e-12;
  for (int threads : {1, 4}) {
    set_threads(threads);
    for (std::size_t k : {1u, 3u}) {
      for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {5, 7}, {2, 3}, {1, 4}}) {
        const std::size_t cin = 3, cout = 4;
        const auto in = random_tensor<T>(cin, h, w, h * 10 + w);
        const auto weight = random_vector<T>(cout * cin * k * k, 1 + k);
        const auto bias = random_vector<T>(cout, 2 + k);
        Tensor<T> a, b;
        kernels::conv_forward<T>(in, weight, bias, k, cout, a);
        reference::conv_forward<T>(in, weight, bias, k, cout, b);
        CHECK(max_diff(a.v, b.v) < tol);

        const auto gout = random_tensor<T>(cout, h, w, 99);
        Tensor<T> gi_a(cin, h, w), gi_b(cin, h, w);
        std::vector<T> gw_a(weight.size()), gw_b(weight.size()), gb_a(cout), gb_b(cout);
        kernels::conv_backward<T>(in, weight, gout, k, &gi_a, gw_a, gb_a);
        reference::conv_backward<T>(in, weight, gout, k, &gi_b, gw_b, gb_b);
        CHECK(max_diff(gi_a.v, gi_b.v) < tol * 10);
        CHECK(max_diff(gw_a, gw_b) < tol * 10);
        CHECK(max_diff(gb_a, gb_b) < tol * 10);
      }
    }
  }
  set_threads(1);
}

TEST_CASE("convolution backward accumulates") {
  const auto in = random_tensor<double>(2, 6, 6, 1);
  const auto weight = random_vector<double>(2 * 2 * 9, 2);
  const auto gout = random_tensor<double>(2, 6, 6, 3);
  Tensor<double> gi(2, 6, 6);
  std::vector<double> gw(weight.size()), gb(2);
  kernels::conv_backward<double>(in, weight, gout, 3, &gi, gw, gb);
  const auto once_gi = gi.v;
  const auto once_gw = gw;
  kernels::conv_backward<double>(in, weight, gout, 3, &gi, gw, gb);
  for (std::size_t i = 0; i < gi.v.size(); ++i) CHECK(gi.v[i] == doctest::Approx(2 * once_gi[i]));
  for (std::size_t i = 0; i < gw.size(); ++i) CHECK(gw[i] == doctest::Approx(2 * once_gw[i]));
}

TEST_CASE("pooling and upsampling match direct definitions") {
  const auto in = random_tensor<double>(2, 6, 8, 5);
  Tensor<double> pooled;
  std::vector<std::uint8_t> arg;
  kernels::maxpool_forward<double>(in, pooled, arg);
  REQUIRE(pooled.h == 3);
  REQUIRE(pooled.w == 4);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        const double m = std::max({in.at(c, 2 * y, 2 * x), in.at(c, 2 * y, 2 * x + 1),
                                   in.at(c, 2 * y + 1, 2 * x), in.at(c, 2 * y + 1, 2 * x + 1)});
        CHECK(pooled.at(c, y, x) == m);
      }
  const auto g = random_tensor<double>(2, 3, 4, 6);
  Tensor<double> gin(2, 6, 8);
  kernels::maxpool_backward<double>(g, arg, gin);
  double total_in = 0, total_out = 0;
  for (double v : gin.v) total_in += v;
  for (double v : g.v) total_out += v;
  CHECK(total_in == doctest::Approx(total_out));

  Tensor<double> up;
  kernels::upsample_forward<double>(pooled, up);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 8; ++x) CHECK(up.at(c, y, x) == pooled.at(c, y / 2, x / 2));
  const auto gu = random_tensor<double>(2, 6, 8, 7);
  Tensor<double> gp(2, 3, 4);
  kernels::upsample_backward<double>(gu, gp);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        const double s = gu.at(c, 2 * y, 2 * x) + gu.at(c, 2 * y, 2 * x + 1) +
                         gu.at(c, 2 * y + 1, 2 * x) + gu.at(c, 2 * y + 1, 2 * x + 1);
        CHECK(gp.at(c, y, x) == doctest::Approx(s));
      }
}

TEST_CASE("analytic gradients match central differences for every layer type") {
  SUBCASE("3x3 convolution") {
    Graph g;
    g.conv(g.conv(0, 3, 3), 1, 3);
    CHECK(gradient_error(g, 1, 8, 8) < 1e-4);
  }
  SUBCASE("1x1 convolution") {
    Graph g;
    g.conv(g.conv(0, 3, 1), 1, 1);
    CHECK(gradient_error(g, 2) < 1e-4);
  }
  SUBCASE("rectifier") {
    Graph g;
    g.conv(g.relu(g.conv(0, 4, 3)), 1, 3);
    CHECK(gradient_error(g, 3) < 1e-4);
  }
  SUBCASE("max pooling") {
    Graph g;
    g.conv(g.upsample(g.conv(g.maxpool(g.relu(g.conv(0, 3, 3))), 2, 1)), 1, 3);
    CHECK(gradient_error(g, 4) < 1e-4);
  }
  SUBCASE("nearest upsampling") {
    Graph g;
    g.conv(g.upsample(g.maxpool(g.conv(0, 2, 3))), 1, 3);
    CHECK(gradient_error(g, 5) < 1e-4);
  }
  SUBCASE("concatenation") {
    Graph g;
    const int a = g.conv(0, 2, 3);
    const int b = g.relu(g.conv(a, 3, 1));
    g.conv(g.concat(b, a), 1, 3);
    CHECK(gradient_error(g, 6) < 1e-4);
  }
  SUBCASE("full encoder-decoder, depth 1") {
    ModelConfig mc;
    mc.depth = 1;
    mc.base_channels = 2;
    CHECK(gradient_error(build_graph(mc), 7) < 1e-4);
  }
  SUBCASE("full encoder-decoder, depth 2") {
    ModelConfig mc;
    mc.depth = 2;
    mc.base_channels = 2;
    CHECK(gradient_error(build_graph(mc), 8, 8, 8, 1) < 1e-4);
  }
}

TEST_CASE("parameter count follows the layer table") {
  ModelConfig mc;
  mc.depth = 1;
  mc.base_channels = 4;
  CHECK(parameter_count(mc) == 1657);
  CHECK(parameter_count(mc) == closed_form_parameters(1, 4));
  for (int depth : {1, 2, 3, 4})
    for (int base : {2, 8, 16}) {
      mc.depth = depth;
      mc.base_channels = base;
      CHECK(parameter_count(mc) == closed_form_parameters(depth, base));
    }
  mc.depth = 2;
  mc.base_channels = 16;
  CHECK(parameter_count(mc) == 117985);
  CHECK(build_graph(mc).levels() == 2);
}

TEST_CASE("initialisation is a pure function of the seed") {
  ModelConfig mc;
  mc.depth = 2;
  mc.base_channels = 4;
  mc.seed = 42;
  const auto a = build_model(mc), b = build_model(mc);
  CHECK(a.params == b.params);
  mc.seed = 43;
  CHECK_FALSE(build_model(mc).params == a.params);
  for (const Node& n : a.graph.nodes()) {
    if (n.op != Op::Conv) continue;
    const double bound = std::sqrt(6.0 / double(n.cin * n.kernel * n.kernel));
    for (std::size_t i = 0; i < n.cout * n.cin * n.kernel * n.kernel; ++i)
      CHECK(std::abs(a.params[n.param_offset + i]) <= bound);
    for (std::size_t i = 0; i < n.cout; ++i)
      CHECK(a.params[n.param_offset + n.cout * n.cin * n.kernel * n.kernel + i] == 0.0f);
  }
}

TEST_CASE("frame sides must divide 2^depth") {
  ModelConfig mc;
  mc.depth = 3;
  mc.base_channels = 2;
  CHECK_THROWS_AS(check_frame_shape(mc, 20, 20), Error);
  CHECK_NOTHROW(check_frame_shape(mc, 24, 16));
  const auto m = build_model(mc);
  CHECK_THROWS_AS(forward(m, {Image(20, 20)}), Error);
  // predict pads instead of failing.
  CHECK(predict_frame(m, Image(20, 20, 1.0f)).rows() == 20);
}

TEST_CASE("invalid model configs are rejected") {
  ModelConfig mc;
  mc.depth = 0;
  CHECK_THROWS_AS(build_model(mc), Error);
  mc.depth = 2;
  mc.kernel = 5;
  CHECK_THROWS_AS(build_model(mc), Error);
  mc.kernel = 3;
  mc.base_channels = 0;
  CHECK_THROWS_AS(build_model(mc), Error);
}

TEST_CASE("zero model gives zero output") {
  ModelConfig mc;
  mc.depth = 2;
  mc.base_channels = 4;
  auto m = build_model(mc);
  std::fill(m.params.begin(), m.params.end(), 0.0f);
  for (const auto& im : forward(m, {test::random_image(8, 12, 1, -5, 5)}))
    for (float v : im.data()) CHECK(v == 0.0f);
  const HyperCube out = predict(m, test::random_cube(Dims{6, 10, 5}, 2, -3, 3));
  for (float v : out.data()) CHECK(v == 0.0f);
}

TEST_CASE("identity-configured model reproduces its input") {
  for (int depth : {1, 2, 3}) {
    ModelConfig mc;
    mc.depth = depth;
    mc.base_channels = 3;
    auto m = build_model(mc);
    make_identity(m);
    const Image im = test::random_image(16, 8, depth, 0.1, 2.0);
    CHECK(test::max_abs_diff(forward(m, {im})[0].data(), im.data()) < 1e-5);
    for (Axis a : kAllAxes) {
      m.axis = a;
      const HyperCube c = test::random_cube(Dims{13, 10, 7}, 3, 0.1, 2.0);
      CHECK(test::max_abs_diff(predict(m, c).data(), c.data()) < 1e-5);
    }
  }
}

TEST_CASE("symmetric kernels commute with a 180 degree rotation") {
  ModelConfig mc;
  mc.depth = 2;
  mc.base_channels = 4;
  mc.seed = 5;
  auto m = build_model(mc);
  symmetrize(m);
  const Image im = test::random_image(16, 16, 8);
  const Image a = forward(m, {rot180(im)})[0];
  const Image b = rot180(forward(m, {im})[0]);
  CHECK(test::max_abs_diff(a.data(), b.data()) < 1e-4);
}

TEST_CASE("a batch equals separate single-frame calls") {
  ModelConfig mc;
  mc.depth = 2;
  mc.base_channels = 4;
  const auto m = build_model(mc);
  const Image a = test::random_image(8, 8, 1), b = test::random_image(8, 8, 2);
  const auto both = forward(m, {a, b});
  CHECK(both[0] == forward(m, {a})[0]);
  CHECK(both[1] == forward(m, {b})[0]);
}

TEST_CASE("an output that does not match the target is an error") {
  Graph g;
  g.conv(g.upsample(g.conv(0, 2, 3)), 1, 3);
  const auto p = random_vector<double>(g.param_count(), 1);
  const std::vector<Tensor<double>> in{random_tensor<double>(1, 4, 4, 2)}, tg{random_tensor<double>(1, 4, 4, 3)};
  CHECK_THROWS_WITH_AS(loss_and_grad<double>(g, p, in, tg), doctest::Contains("does not match"), Error);
}

TEST_CASE("loss of an exact fit is zero with zero gradient") {
  ModelConfig mc;
  mc.depth = 1;
  mc.base_channels = 3;
  const auto m = build_model(mc);
  const std::vector<Image> in{test::random_image(8, 8, 3)};
  const auto out = forward(m, in);
  const auto lg = loss_and_grad(m, in, out);
  CHECK(lg.loss == 0.0);
  for (float g : lg.grad) CHECK(g == 0.0f);
}

TEST_CASE("doubling the residual quadruples the loss") {
  ModelConfig mc;
  mc.depth = 1;
  mc.base_channels = 3;
  const auto m = build_model(mc);
  const std::vector<Image> in{test::random_image(8, 8, 3), test::random_image(8, 8, 4)};
  const auto out = forward(m, in);
  std::vector<Image> t1 = in, t2 = in;
  for (std::size_t f = 0; f < in.size(); ++f)
    for (std::size_t i = 0; i < out[f].size(); ++i) {
      const double y = out[f].data()[i], t = t1[f].data()[i];
      t2[f].data()[i] = static_cast<float>(y - 2 * (y - t));
    }
  CHECK(loss_and_grad(m, in, t2).loss == doctest::Approx(4 * loss_and_grad(m, in, t1).loss).epsilon(1e-5));
}

TEST_CASE("non-finite activations name the layer") {
  ModelConfig mc;
  mc.depth = 1;
  mc.base_channels = 2;
  auto m = build_model(mc);
  m.params[0] = std::numeric_limits<float>::infinity();
  const std::vector<Image> in{test::random_image(8, 8, 3, 0.5, 1.0)};
  CHECK_THROWS_WITH_AS(loss_and_grad(m, in, in), doctest::Contains("layer"), Error);
}

TEST_CASE("gradients do not depend on the thread count") {
  ModelConfig mc;
  mc.depth = 2;
  mc.base_channels = 4;
  const auto m = build_model(mc);
  std::vector<Image> in, tg;
  for (std::uint64_t i = 0; i < 6; ++i) {
    in.push_back(test::random_image(16, 16, i));
    tg.push_back(test::random_image(16, 16, 100 + i));
  }
  const auto one = loss_and_grad(m, in, tg);
  set_threads(4);
  const auto four = loss_and_grad(m, in, tg);
  set_threads(1);
  CHECK(one.loss == four.loss);
  CHECK(one.grad == four.grad);
}

TEST_CASE("padding reflects and cropping restores the frame") {
  const Image im = test::random_image(5, 6, 1);
  const Image p = pad_to_multiple(im, 4);
  CHECK(p.rows() == 8);
  CHECK(p.cols() == 8);
  CHECK(p(5, 0) == im(3, 0));
  CHECK(p(0, 6) == im(0, 4));
  CHECK(crop(p, 5, 6) == im);
  CHECK(pad_to_multiple(im, 1) == im);
}

TEST_CASE("augmentation applies the flip group to both stacks") {
  const Image a = test::random_image(4, 6, 1), b = test::random_image(4, 6, 2);
  const FramePairs one = augment(FramePairs{{a}, {b}});
  REQUIRE(one.input.size() == 4);
  CHECK(one.input[0] == a);
  CHECK(one.input[3] == flip(flip(a, 1), 2));
  for (int t = 0; t < 4; ++t) CHECK(one.target[t] == flip(b, t));

  const FramePairs flat = augment(FramePairs{{Image(4, 4, 2.0f)}, {Image(4, 4, 2.0f)}});
  for (const auto& f : flat.input) CHECK(f == Image(4, 4, 2.0f));

  const FramePairs twice = augment(one);
  REQUIRE(twice.input.size() == 16);
  for (const auto& f : twice.input) {
    bool member = false;
    for (int t = 0; t < 4; ++t) member = member || f == flip(a, t);
    CHECK(member);
  }
}

TEST_CASE("augmenting a pair set quadruples the permuted axis") {
  const HyperCube c = test::random_cube(Dims{4, 6, 4}, 3);
  permute::PairSet p = permute::split_permute(c, Axis::W);
  const permute::PairSet q = augment(p);
  CHECK(q.input.nw() == 16);
  CHECK(q.target.nw() == 16);
  CHECK(slice_frame(q.input, Axis::W, 5) == flip(slice_frame(p.input, Axis::W, 1), 1));
  CHECK(slice_frame(q.target, Axis::W, 7) == flip(slice_frame(p.target, Axis::W, 1), 3));
  CHECK_THROWS_AS(flip(Image(2, 2), 4), Error);
}
