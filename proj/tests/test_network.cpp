#include <cmath>
#include <random>

#include "amr/network.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace amr;
namespace op = amr::ops;

namespace {

Tensor<float> random_images(Shape shape, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  auto t = Tensor<float>::zeros(std::move(shape));
  for (auto& v : t.value()) v = dist(rng);
  return t;
}

}  // namespace

TEST_CASE("model init: parameter shapes, names and seeded determinism") {
  auto m = AmrModel<float>::init(5, 123);
  CHECK(m.backbone.convs.size() == 4);
  CHECK(m.backbone.convs[0].shape() == Shape{16, 3, 3, 3});
  CHECK(m.backbone.convs[3].shape() == Shape{64, 64, 3, 3});
  CHECK(m.w_spot.shape() == Shape{5, 64});
  CHECK(m.w_comp.shape() == Shape{5, 64});
  CHECK(m.amm.channel_kernel.shape() == Shape{5});
  CHECK(m.amm.spatial_kernel.shape() == Shape{1, 1, 7, 7});

  auto names = m.named_params(true, true);
  REQUIRE(names.size() == 8);
  CHECK(names[0].first == "backbone.conv0");
  CHECK(names[4].first == "head.spotlight");
  CHECK(names[5].first == "head.compensation");
  CHECK(names[6].first == "amm.channel_kernel");
  CHECK(names[7].first == "amm.spatial_kernel");
  CHECK(m.named_params(false, false).size() == 6);

  auto m2 = AmrModel<float>::init(5, 123);
  auto m3 = AmrModel<float>::init(5, 124);
  CHECK(m2.w_spot.value() == m.w_spot.value());
  CHECK(m2.backbone.convs[2].value() == m.backbone.convs[2].value());
  CHECK(m3.w_spot.value() != m.w_spot.value());
}

TEST_CASE("forward: output shapes at stride 8 and repeatability") {
  auto m = AmrModel<float>::init(4, 9);
  auto imgs = random_images({2, 3, 64, 64}, 5);
  Graph<float> g;
  auto out = forward(g, m, imgs, ModulationFn::gaussian());
  CHECK(out.features.shape() == Shape{2, 64, 8, 8});
  CHECK(out.logits_s.shape() == Shape{2, 4});
  CHECK(out.logits_c.shape() == Shape{2, 4});
  CHECK(out.cam_s.shape() == Shape{2, 4, 8, 8});
  CHECK(out.cam_c.shape() == Shape{2, 4, 8, 8});

  Graph<float> g2;
  auto out2 = forward(g2, m, imgs, ModulationFn::gaussian());
  CHECK(out2.logits_s.value() == out.logits_s.value());
  CHECK(out2.cam_c.value() == out.cam_c.value());

  auto small = Tensor<float>::zeros({1, 3, 16, 16});
  Graph<float> g3;
  CHECK_THROWS_AS(forward(g3, m, small, ModulationFn::gaussian()), DimensionError);
}

TEST_CASE("bias-free heads: logits equal the spatial mean of the class maps") {
  auto m = AmrModel<float>::init(5, 77);
  auto imgs = random_images({2, 3, 64, 64}, 11);
  Graph<float> g;
  auto out = forward(g, m, imgs, ModulationFn::gaussian());
  const int64_t hw = 64;
  for (int b = 0; b < 2; ++b)
    for (int n = 0; n < 5; ++n) {
      double mean = 0.0;
      for (int p = 0; p < hw; ++p) mean += out.cam_s.value()[(b * 5 + n) * hw + p];
      mean /= hw;
      CHECK(out.logits_s.value()[b * 5 + n] == doctest::Approx(mean).epsilon(1e-4));
    }
}

TEST_CASE("with both amm stages off, equal heads give equal branches") {
  auto m = AmrModel<float>::init(3, 41);
  m.w_comp.value() = m.w_spot.value();
  auto imgs = random_images({1, 3, 32, 32}, 2);
  Graph<float> g;
  auto out = forward(g, m, imgs, ModulationFn::gaussian(), false, false);
  CHECK(out.logits_c.value() == out.logits_s.value());
  CHECK(out.cam_c.value() == out.cam_s.value());
}

TEST_CASE("normalize_cam: masks absent classes, min-max scales onto [0,1]") {
  Graph<float> g;
  auto cam = Tensor<float>::from({1, 2, 2, 2}, {4, 2, -2, 1, 9, 9, 9, 9});
  std::vector<float> labels{1, 0};
  auto out = normalize_cam(g, cam, labels);
  // present map {4,2,-2,1}: shift by min -2, divide by range 6
  CHECK(out.value()[0] == doctest::Approx(1.0));
  CHECK(out.value()[1] == doctest::Approx(4.0 / 6.0));
  CHECK(out.value()[2] == 0.0f);  // map min lands at zero
  CHECK(out.value()[3] == doctest::Approx(0.5));
  for (int i = 4; i < 8; ++i) CHECK(out.value()[i] == 0.0f);  // absent class
}

TEST_CASE("classification loss reference values") {
  Graph<float> g;
  auto zero = Tensor<float>::zeros({1, 2}, true);
  auto l = loss_cls(g, zero, std::vector<float>{1, 0});
  CHECK(l.item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));

  auto strong = Tensor<float>::from({1, 1}, {10.0f}, true);
  Graph<float> g2;
  auto ls = loss_cls(g2, strong, std::vector<float>{1});
  CHECK(ls.item() == doctest::Approx(4.5398e-5).epsilon(1e-3));

  // symmetry: logit z with label 1 costs the same as -z with label 0
  auto a = Tensor<float>::from({1, 1}, {1.7f}, true);
  auto b = Tensor<float>::from({1, 1}, {-1.7f}, true);
  Graph<float> g3;
  CHECK(loss_cls(g3, a, std::vector<float>{1}).item() ==
        doctest::Approx(loss_cls(g3, b, std::vector<float>{0}).item()));
}

TEST_CASE("consistency loss: zero for identical maps, one for disjoint maps") {
  std::vector<float> labels{1, 1};
  ForwardOut<float> fo;
  fo.logits_s = Tensor<float>::zeros({1, 2}, true);
  fo.logits_c = Tensor<float>::zeros({1, 2}, true);

  SUBCASE("identical branch maps") {
    fo.cam_s = Tensor<float>::from({1, 2, 1, 2}, {1, 2, 3, 4}, true);
    fo.cam_c = Tensor<float>::from({1, 2, 1, 2}, {1, 2, 3, 4}, true);
    Graph<float> g;
    auto l = loss_total(g, fo, labels);
    CHECK(l.cps.item() == doctest::Approx(0.0));
    CHECK(l.total.item() == doctest::Approx(l.cls.item()));
  }
  SUBCASE("disjoint peaks cost exactly one") {
    // maps normalize to {1,0} vs {0,1}: every compared element differs by 1
    fo.cam_s = Tensor<float>::from({1, 2, 1, 2}, {2, 0, 7, 3}, true);
    fo.cam_c = Tensor<float>::from({1, 2, 1, 2}, {0, 2, 3, 7}, true);
    Graph<float> g;
    auto l = loss_total(g, fo, labels);
    CHECK(l.cps.item() == doctest::Approx(1.0));
  }
}

TEST_CASE("objective identity and the cps switch") {
  auto m = AmrModel<float>::init(3, 55, 3, 3);
  auto imgs = random_images({2, 3, 32, 32}, 8);
  std::vector<float> labels{1, 0, 1, 0, 1, 1};
  Graph<float> g;
  auto out = forward(g, m, imgs, ModulationFn::gaussian());
  auto l = loss_total(g, out, labels, true);
  CHECK(std::abs(l.total.item() - l.cls.item() - l.cps.item()) < 1e-6);
  CHECK(l.cps.item() > 0.0f);

  Graph<float> g2;
  auto out2 = forward(g2, m, imgs, ModulationFn::gaussian());
  auto l2 = loss_total(g2, out2, labels, false);
  CHECK(l2.total.item() == doctest::Approx(l2.cls.item()));
  CHECK(l2.cps.item() == doctest::Approx(l.cps.item()).epsilon(1e-6));
}

TEST_CASE("full objective gradients match finite differences") {
  auto model = AmrModel<double>::init(3, 101, 3, 3);
  auto imgs = Tensor<double>::zeros({2, 3, 32, 32});
  {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (auto& v : imgs.value()) v = dist(rng);
  }
  std::vector<double> labels{1, 0, 1, 1, 1, 0};

  for (auto kind : {ModulationKind::Gaussian, ModulationKind::Identity}) {
    auto cache = std::make_shared<StatsCache>();
    auto build = [&, cache](Graph<double>& g, std::vector<Tensor<double>>& in) {
      AmrModel<double> m;
      m.n_classes = 3;
      for (int i = 0; i < 4; ++i) m.backbone.convs.push_back(in[i]);
      m.w_spot = in[4];
      m.w_comp = in[5];
      m.amm.channel_kernel = in[6];
      m.amm.spatial_kernel = in[7];
      ModulationFn fn = kind == ModulationKind::Gaussian ? ModulationFn::gaussian()
                                                         : ModulationFn::identity();
      fn.stats_cache = cache;
      cache->rewind();
      if (!cache->entries.empty()) cache->frozen = true;
      auto out = forward(g, m, imgs, fn);
      return loss_total(g, out, labels, true).total;
    };
    // smaller step: the composite graph has relu kinks close to some
    // pre-activations, and a wide stencil straddles them
    auto res = gradcheck::check_sampled(model.params(), build, 5, 404, 1e-3, 1e-5);
    CHECK_MESSAGE(res.ok, res.what);
  }
}
