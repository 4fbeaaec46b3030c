#include "spmat/grad_check.hpp"
#include "spmat/ops.hpp"
#include "spmat/rng.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace spmat;
namespace o = spmat::ops;

namespace {

Tensor random_tensor(Rng &rng, Shape shape, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  for (auto &v : t.values())
    v = rng.uniform(lo, hi);
  return t;
}

/// Random-weighted sum keeps every output coordinate in the check.
Var readout(Tape &tape, const Var &y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w(y.shape());
  for (auto &v : w.values())
    v = rng.uniform(-1, 1);
  return o::sum(o::mul(y, tape.constant(std::move(w))));
}

double check(const std::function<Var(Tape &, std::span<const Var>)> &f,
             std::vector<Tensor> params) {
  GradCheckOptions opt;
  opt.step = 1e-5;
  return grad_check([&](Tape &t, std::span<const Var> p) { return readout(t, f(t, p), 77); }, params, opt)
      .max_relative_error;
}

} // namespace

TEST(Tensor, ShapesAndErrors) {
  const auto m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.at(1, 2), 6.0);
  EXPECT_SPMAT_ERROR(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ErrorCode::ShapeMismatch);
  EXPECT_SPMAT_ERROR(m.item(), ErrorCode::NotScalar);
  EXPECT_EQ(Tensor::scalar(4).item(), 4.0);
}

TEST(Ops, WorkedExamples) {
  Tape t;
  const int seg[] = {0, 0, 1};
  const auto s = o::segment_sum(t.leaf(Tensor(Shape{3, 1}, {1, 2, 3})), seg, 2);
  EXPECT_EQ(s.value().data(), (std::vector<double>{3, 3}));

  const auto n = o::l2_normalize_rows(t.leaf(Tensor::matrix({{3, 4}})));
  EXPECT_NEAR(n.value()[0], 0.6, 1e-15);
  EXPECT_NEAR(n.value()[1], 0.8, 1e-15);

  const auto z = o::standardize_columns(t.leaf(Tensor::matrix({{1}, {3}})));
  EXPECT_NEAR(z.value()[0], -1.0, 1e-12);
  EXPECT_NEAR(z.value()[1], 1.0, 1e-12);

  const auto zero = o::l2_normalize_rows(t.leaf(Tensor::matrix({{0, 0}})));
  EXPECT_EQ(zero.value().data(), (std::vector<double>{0, 0}));
}

TEST(Backward, SimpleGradients) {
  Tape t;
  const auto x = t.leaf(Tensor::matrix({{1, 2}, {3, 4}}));
  auto g = t.backward(o::sum(x));
  EXPECT_EQ(g[x].data(), (std::vector<double>(4, 1.0)));

  Tape t2;
  const auto y = t2.leaf(Tensor(Shape{2}, {2, -3}));
  const auto unused = t2.leaf(Tensor(Shape{3}, 5.0));
  auto g2 = t2.backward(o::sum(o::mul(y, y)));
  EXPECT_EQ(g2[y].data(), (std::vector<double>{4, -6}));
  EXPECT_EQ(g2[unused].data(), (std::vector<double>(3, 0.0)));
}

TEST(Backward, Errors) {
  Tape a, b;
  const auto x = a.leaf(Tensor::matrix({{1, 2}}));
  EXPECT_SPMAT_ERROR(b.backward(o::sum(x)), ErrorCode::DetachedLoss);
  EXPECT_SPMAT_ERROR(a.backward(x), ErrorCode::NotScalar);
  EXPECT_SPMAT_ERROR(o::log(a.leaf(Tensor::matrix({{-1.0}}))), ErrorCode::NonFinite);
  EXPECT_SPMAT_ERROR(o::add(x, a.leaf(Tensor::matrix({{1}, {2}}))), ErrorCode::ShapeMismatch);
  EXPECT_SPMAT_ERROR(o::matmul(x, x), ErrorCode::ShapeMismatch);
  const int seg[] = {0, 0};
  EXPECT_SPMAT_ERROR(o::segment_mean(a.leaf(Tensor::matrix({{1}, {2}})), seg, 2), ErrorCode::EmptySegment);
}

TEST(Backward, BitwiseRepeatable) {
  Rng rng(3);
  const auto x = random_tensor(rng, {5, 4});
  const auto w = random_tensor(rng, {4, 3});
  auto run = [&] {
    Tape t;
    const auto a = t.leaf(x), b = t.leaf(w);
    const auto loss = o::sum(o::softplus(o::matmul(a, b)));
    auto g = t.backward(loss);
    return std::pair{loss.value().item(), g[a]};
  };
  EXPECT_EQ(run(), run());
}

TEST(SegmentSum, TotalPreserved) {
  Rng rng(8);
  const auto x = random_tensor(rng, {50, 1});
  std::vector<int> seg;
  for (int i = 0; i < 50; ++i)
    seg.push_back(static_cast<int>(rng.below(7)));
  Tape t;
  const auto s = o::segment_sum(t.leaf(x), seg, 7);
  double a = 0, b = 0;
  for (double v : x.values())
    a += v;
  for (double v : s.value().values())
    b += v;
  EXPECT_NEAR(a, b, 1e-12);
}

class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, EveryPrimitive) {
  const std::uint64_t seed = static_cast<std::uint64_t>(GetParam());
  Rng rng(seed);
  const auto a = random_tensor(rng, {4, 3});
  const auto b = random_tensor(rng, {4, 3});
  const auto w = random_tensor(rng, {3, 5});
  const auto pos = random_tensor(rng, {4, 3}, 0.5, 2.0);
  // nudge relu inputs away from the kink
  auto off_zero = a;
  for (auto &v : off_zero.values())
    v = v >= 0 ? v + 0.05 : v - 0.05;
  const int idx[] = {2, 0, 3, 3, 1};
  const int seg[] = {1, 0, 1, 2};
  const double tol = 1e-6;

  EXPECT_LT(check([](Tape &, auto p) { return o::matmul(p[0], p[1]); }, {a, w}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::transpose(p[0]); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::add(p[0], p[1]); }, {a, b}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::sub(p[0], p[1]); }, {a, b}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::mul(p[0], p[1]); }, {a, b}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::div(p[0], p[1]); }, {a, pos}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::shift(p[0], 0.7); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::scale(p[0], -1.3); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::concat_cols({p[0], p[1], p[0]}); }, {a, b}), tol);
  EXPECT_LT(check([&](Tape &, auto p) { return o::gather_rows(p[0], idx); }, {a}), tol);
  EXPECT_LT(check([&](Tape &, auto p) { return o::embedding_lookup(p[0], idx); }, {a}), tol);
  EXPECT_LT(check([&](Tape &, auto p) { return o::segment_sum(p[0], seg, 3); }, {a}), tol);
  EXPECT_LT(check([&](Tape &, auto p) { return o::segment_mean(p[0], seg, 3); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::exp(p[0]); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::log(p[0]); }, {pos}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::pow(p[0], 2.5); }, {pos}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::pow(p[0], 2.0); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::sigmoid(p[0]); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::softplus(p[0]); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::relu(p[0]); }, {off_zero}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::sum(p[0]); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::mean(p[0]); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::sum_axis(p[0], 0); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::sum_axis(p[0], 1); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::mean_axis(p[0], 0); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::mean_axis(p[0], 1); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::l2_normalize_rows(p[0]); }, {a}), tol);
  EXPECT_LT(check([](Tape &, auto p) { return o::standardize_columns(p[0]); }, {a}), tol);
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Range(0, 3));

TEST(GradCheck, ExactQuadratic) {
  Rng rng(12);
  const auto theta = random_tensor(rng, {6, 5});
  const auto r = grad_check([](Tape &, std::span<const Var> p) { return o::sum(o::mul(p[0], p[0])); },
                            std::vector<Tensor>{theta});
  EXPECT_LT(r.max_relative_error, 1e-7);
  EXPECT_EQ(r.coordinates_checked, 30u);
}

TEST(GradCheck, SubsetForLargeParameters) {
  Rng rng(13);
  const auto theta = random_tensor(rng, {40, 20});
  GradCheckOptions opt;
  opt.max_coordinates = 64;
  const auto r = grad_check([](Tape &, std::span<const Var> p) { return o::sum(o::exp(p[0])); },
                            std::vector<Tensor>{theta}, opt);
  EXPECT_EQ(r.coordinates_checked, 64u);
  EXPECT_LT(r.max_relative_error, 1e-7);
}

TEST(GradCheck, DetectsWrongGradient) {
  // A deliberately broken op: value x^2, claimed derivative x.
  const auto broken = [](Tape &t, std::span<const Var> p) {
    Tensor y = p[0].value();
    for (auto &v : y.values())
      v = v * v;
    auto out = t.record("broken", y, {p[0]},
                        [x = p[0].value()](const Tensor &, const Tensor &g, std::span<Tensor *const> gi) {
                          for (std::size_t i = 0; i < x.numel(); ++i)
                            (*gi[0])[i] += g[i] * x[i];
                        });
    return o::sum(out);
  };
  const auto r = grad_check(broken, std::vector<Tensor>{Tensor::matrix({{1.0, -2.0}})});
  EXPECT_GT(r.max_relative_error, 0.1);
}
