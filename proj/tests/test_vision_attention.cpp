#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracle.hpp"
#include "stvqa/attention.hpp"
#include "stvqa/vision.hpp"
#include "testutil.hpp"

using namespace stvqa;
using testutil::rel_err;

TEST_CASE("feature grid validation") {
  FeatureGrid g;
  g.image_id = "img";
  g.grid_rows = 2;
  g.grid_cols = 2;
  g.regions = Tensor({4, 3});
  CHECK_NOTHROW(g.validate());
  CHECK(g.k() == 4);
  CHECK(g.raw_dim() == 3);

  g.grid_cols = 3;  // rows*cols no longer matches K
  CHECK_THROWS(g.validate());
  g.grid_cols = 2;
  g.regions[0] = std::nan("");
  CHECK_THROWS(g.validate());
}

TEST_CASE("transform_regions") {
  SUBCASE("identity projection on nonnegative input passes through") {
    Tape tape;
    FeatureGrid g;
    g.image_id = "i";
    g.grid_rows = 1;
    g.grid_cols = 2;
    g.regions = Tensor({2, 2}, {0.5, 0, 1, 2});
    Var w = tape.leaf(Tensor({2, 2}, {1, 0, 0, 1}));
    Var b = tape.leaf(Tensor({2}));
    Var y = transform_regions(tape, g, w, b);
    CHECK(y.val().data() == g.regions.data());
  }
  SUBCASE("large negative bias annihilates everything") {
    Tape tape;
    Rng rng(2);
    FeatureGrid g = testutil::make_grid(rng, "i", 2, 2, 3);
    Var w = tape.leaf(random_uniform(rng, {3, 4}, -1, 1));
    Var b = tape.leaf(Tensor::full({4}, -100.0));
    Var y = transform_regions(tape, g, w, b);
    for (int i = 0; i < y.val().numel(); ++i) CHECK(y.val()[i] == 0.0);
  }
  SUBCASE("random grid matches the loop oracle and stays nonnegative") {
    Rng rng(3);
    RunConfig cfg;
    ModelParams p = testutil::make_params(cfg, 10, rng);
    FeatureGrid g = testutil::make_grid(rng, "i", 2, 2, cfg.raw_dim);
    Tape tape;
    Var y = transform_regions(tape, g, tape.leaf(p.w_img), tape.leaf(p.b_img));
    const Tensor want = oracle::region_features(g, p);
    for (int i = 0; i < want.numel(); ++i) {
      CHECK(std::fabs(y.val()[i] - want[i]) < 1e-12);
      CHECK(y.val()[i] >= 0.0);
    }
  }
  SUBCASE("row independence: region k depends only on raw row k") {
    Rng rng(4);
    FeatureGrid g1 = testutil::make_grid(rng, "i", 2, 2, 3);
    FeatureGrid g2 = g1;
    for (int j = 0; j < 3; ++j) g2.regions.at(3, j) += 1.0;  // touch only last region
    Tape tape;
    Var w = tape.leaf(random_uniform(rng, {3, 4}, -1, 1));
    Var b = tape.leaf(random_uniform(rng, {4}, -1, 1));
    const Tensor y1 = transform_regions(tape, g1, w, b).val();
    const Tensor y2 = transform_regions(tape, g2, w, b).val();
    for (int r = 0; r < 3; ++r)
      for (int j = 0; j < 4; ++j) CHECK(y1.at(r, j) == y2.at(r, j));
  }
  SUBCASE("raw width mismatch is an error") {
    Tape tape;
    Rng rng(5);
    FeatureGrid g = testutil::make_grid(rng, "i", 1, 2, 3);
    Var w = tape.leaf(Tensor({5, 4}));
    Var b = tape.leaf(Tensor({4}));
    CHECK_THROWS_AS(transform_regions(tape, g, w, b), ShapeError);
  }
}

TEST_CASE("attention mode round trip") {
  for (const char* name : {"full", "q_only", "a_only", "none"}) {
    CHECK(std::string(attention_mode_name(attention_mode_from_string(name))) == name);
  }
  CHECK_THROWS(attention_mode_from_string("both"));
}

TEST_CASE("affinity matrix") {
  Tape tape;
  SUBCASE("single word gives an all-ones row") {
    Var words = tape.leaf(Tensor({1, 2}, {0.3, -0.4}));
    Var regions = tape.leaf(Tensor({3, 2}, {1, 0, 0, 1, 1, 1}));
    Var a = affinity_matrix(words, regions);
    for (int k = 0; k < 3; ++k) CHECK(a.val().at(0, k) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("orthogonal equal-norm words give uniform columns") {
    Var words = tape.leaf(Tensor({2, 2}, {1, 0, 0, 1}));
    Var regions = tape.leaf(Tensor({2, 2}, {1, 1, 2, 2}));
    Var a = affinity_matrix(words, regions);
    for (int m = 0; m < 2; ++m)
      for (int k = 0; k < 2; ++k) CHECK(a.val().at(m, k) == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("worked 2x2 example") {
    // scores [[0,1],[0,0]]: words (1,0),(0,0) against regions (0,0),(1,0)
    // would be degenerate; build scores directly instead
    Var words = tape.leaf(Tensor({2, 1}, {1, 0}));
    Var regions = tape.leaf(Tensor({2, 1}, {0, 1}));
    Var a = affinity_matrix(words, regions);
    const double e = std::exp(1.0);
    CHECK(rel_err(a.val().at(0, 0), 0.5) < 1e-14);
    CHECK(rel_err(a.val().at(1, 0), 0.5) < 1e-14);
    CHECK(rel_err(a.val().at(0, 1), e / (e + 1)) < 1e-14);
    CHECK(rel_err(a.val().at(1, 1), 1 / (e + 1)) < 1e-14);
  }
  SUBCASE("columns sum to one within 1e-12") {
    Rng rng(6);
    Var words = tape.leaf(random_uniform(rng, {5, 4}, -2, 2));
    Var regions = tape.leaf(random_uniform(rng, {6, 4}, -2, 2));
    Var a = affinity_matrix(words, regions);
    for (int k = 0; k < 6; ++k) {
      double s = 0.0;
      for (int m = 0; m < 5; ++m) s += a.val().at(m, k);
      CHECK(std::fabs(s - 1.0) < 1e-12);
    }
  }
  SUBCASE("width mismatch rejected") {
    Var words = tape.leaf(Tensor({2, 3}));
    Var regions = tape.leaf(Tensor({2, 4}));
    CHECK_THROWS_AS(affinity_matrix(words, regions), ShapeError);
  }
}

TEST_CASE("attention from affinity") {
  Tape tape;
  SUBCASE("single word gives ones") {
    Var a = tape.leaf(Tensor({1, 3}, {1, 1, 1}));
    CHECK(attention_from_affinity(a).val().data() == std::vector<double>{1, 1, 1});
  }
  SUBCASE("uniform columns give 1/M") {
    Var a = tape.leaf(Tensor({4, 2}, {0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25}));
    Var att = attention_from_affinity(a);
    CHECK(att.val()[0] == 0.25);
    CHECK(att.val()[1] == 0.25);
  }
  SUBCASE("carried worked example gives [0.5, e/(e+1)]") {
    Var words = tape.leaf(Tensor({2, 1}, {1, 0}));
    Var regions = tape.leaf(Tensor({2, 1}, {0, 1}));
    Var att = attention_from_affinity(affinity_matrix(words, regions));
    const double e = std::exp(1.0);
    CHECK(rel_err(att.val()[0], 0.5) < 1e-14);
    CHECK(rel_err(att.val()[1], e / (e + 1)) < 1e-14);
  }
  SUBCASE("entries lie in (0,1]") {
    Rng rng(7);
    Var words = tape.leaf(random_uniform(rng, {5, 4}, -3, 3));
    Var regions = tape.leaf(random_uniform(rng, {6, 4}, -3, 3));
    Var att = attention_from_affinity(affinity_matrix(words, regions));
    for (int k = 0; k < 6; ++k) {
      CHECK(att.val()[k] > 0.0);
      CHECK(att.val()[k] <= 1.0);
    }
  }
}

TEST_CASE("combine attentions") {
  Tape tape;
  SUBCASE("worked arithmetic example") {
    Var q = tape.leaf(Tensor({2}, {0.2, 0.8}));
    Var a = tape.leaf(Tensor({2}, {0.6, 0.4}));
    Var l = tape.leaf(Tensor({1}, {0.5}));
    Var c = combine_attentions(q, a, l);
    CHECK(rel_err(c.val()[0], 0.7 / 1.5) < 1e-12);
    CHECK(rel_err(c.val()[1], 0.8 / 1.5) < 1e-12);
    CHECK(std::fabs(c.val()[0] + c.val()[1] - 1.0) < 1e-9);
  }
  SUBCASE("lambda 0 reduces to normalized answer attention") {
    Var q = tape.leaf(Tensor({2}, {0.9, 0.1}));
    Var a = tape.leaf(Tensor({2}, {0.6, 0.2}));
    Var l = tape.leaf(Tensor({1}, {0.0}));
    Var c = combine_attentions(q, a, l);
    CHECK(rel_err(c.val()[0], 0.75) < 1e-12);
    CHECK(rel_err(c.val()[1], 0.25) < 1e-12);
  }
  SUBCASE("uniform in, uniform out") {
    Var q = tape.leaf(Tensor({4}, {0.25, 0.25, 0.25, 0.25}));
    Var a = tape.leaf(Tensor({4}, {0.25, 0.25, 0.25, 0.25}));
    Var l = tape.leaf(Tensor({1}, {0.5}));
    Var c = combine_attentions(q, a, l);
    for (int k = 0; k < 4; ++k) CHECK(rel_err(c.val()[k], 0.25) < 1e-12);
  }
  SUBCASE("degenerate denominator is an error") {
    Var q = tape.leaf(Tensor({2}, {0.5, 0.5}));
    Var a = tape.leaf(Tensor({2}, {-0.25, -0.25}));
    Var l = tape.leaf(Tensor({1}, {0.5}));
    CHECK_THROWS_AS(combine_attentions(q, a, l), DegenerateAttentionError);
  }
}

TEST_CASE("attend image") {
  Tape tape;
  SUBCASE("one-hot attention selects its region row") {
    Var regions = tape.leaf(Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
    Var att = tape.leaf(Tensor({3}, {0, 1, 0}));
    CHECK(attend_image(regions, att).val().data() == std::vector<double>{3, 4});
  }
  SUBCASE("uniform attention gives the mean region") {
    Var regions = tape.leaf(Tensor({2, 2}, {0, 2, 4, 0}));
    Var att = tape.leaf(Tensor({2}, {0.5, 0.5}));
    CHECK(attend_image(regions, att).val().data() == std::vector<double>{2, 1});
  }
  SUBCASE("random case matches loop oracle") {
    Rng rng(8);
    const Tensor regions = random_uniform(rng, {3, 4}, -1, 1);
    const Tensor att = random_uniform(rng, {3}, 0, 1);
    Var y = attend_image(tape.leaf(regions), tape.leaf(att));
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int r = 0; r < 3; ++r) acc += att[r] * regions.at(r, j);
      CHECK(std::fabs(y.val()[j] - acc) < 1e-12);
    }
  }
}

TEST_CASE("uniform attention leaf") {
  Tape tape;
  Var u = uniform_attention(tape, 4);
  for (int k = 0; k < 4; ++k) CHECK(u.val()[k] == 0.25);
  CHECK(tape.requires_grad(u.id) == false);
}

TEST_CASE("permuting regions permutes attentions and preserves x_img") {
  Rng rng(9);
  const int k = 4, d = 3;
  const Tensor words = random_uniform(rng, {3, d}, -1, 1);
  const Tensor regions = random_uniform(rng, {k, d}, -1, 1);
  const std::vector<int> perm{2, 0, 3, 1};
  Tensor shuffled({k, d});
  for (int r = 0; r < k; ++r)
    for (int j = 0; j < d; ++j) shuffled.at(r, j) = regions.at(perm[static_cast<size_t>(r)], j);

  auto run = [&](const Tensor& reg) {
    Tape tape;
    Var att = attention_from_affinity(affinity_matrix(tape.leaf(words), tape.leaf(reg)));
    Var x = attend_image(tape.leaf(reg), att);
    return std::make_pair(att.val(), x.val());
  };
  const auto [att_base, x_base] = run(regions);
  const auto [att_perm, x_perm] = run(shuffled);

  for (int r = 0; r < k; ++r) {
    CHECK(att_perm[r] == doctest::Approx(att_base[perm[static_cast<size_t>(r)]]).epsilon(1e-15));
  }
  for (int j = 0; j < d; ++j) CHECK(std::fabs(x_perm[j] - x_base[j]) < 1e-12);
}
