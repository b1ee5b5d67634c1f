#include <doctest.h>

#include <cmath>

#include "support/grad_check.hpp"
#include "transsent/nn/tensor_io.hpp"
#include "transsent/translate.hpp"

using namespace transsent;

namespace {

RelationConfig make_config(int k, int d) {
  RelationConfig c;
  c.repr_dim = k;
  c.relation_dim = d;
  return c;
}

nn::Matrix vec(std::initializer_list<double> values) {
  nn::Matrix m(1, static_cast<int>(values.size()));
  int j = 0;
  for (double v : values) m.at(0, j++) = v;
  return m;
}

}  // namespace

TEST_CASE("identity projection passes vectors through") {
  RelationNet net(make_config(3, 3), 1);
  nn::Parameter* m = net.params().find("rel.and.m");
  m->value.fill(0.0);
  for (int i = 0; i < 3; ++i) m->value.at(i, i) = 1.0;
  nn::Matrix z = vec({0.5, -1.5, 2.0});
  nn::Matrix out = net.project(z, Marker::And);
  CHECK(nn::allclose(out, z, 0.0));

  nn::Matrix zero = net.project(nn::Matrix(1, 3), Marker::And);
  for (int j = 0; j < 3; ++j) CHECK(zero.at(0, j) == 0.0);
}

TEST_CASE("projection matches independent matrix arithmetic at k=3 d=2") {
  RelationNet net(make_config(3, 2), 1);
  nn::Parameter* m = net.params().find("rel.because.m");
  double v = 0.1;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) m->value.at(i, j) = v += 0.2;
  const nn::Matrix z = vec({1.0, 2.0, 3.0});
  const nn::Matrix out = net.project(z, Marker::Because);
  for (int j = 0; j < 2; ++j) {
    double expect = 0.0;
    for (int i = 0; i < 3; ++i) expect += z.at(0, i) * m->value.at(i, j);
    CHECK(out.at(0, j) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("projection is linear") {
  RelationNet net(make_config(5, 4), 3);
  nn::Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    nn::Matrix x = nn::Matrix::randn(1, 5, 1.0, rng);
    nn::Matrix y = nn::Matrix::randn(1, 5, 1.0, rng);
    const double a = rng.normal(), b = rng.normal();
    nn::Matrix combo(1, 5);
    for (int j = 0; j < 5; ++j) combo.at(0, j) = a * x.at(0, j) + b * y.at(0, j);
    nn::Matrix lhs = net.project(combo, Marker::If);
    nn::Matrix px = net.project(x, Marker::If);
    nn::Matrix py = net.project(y, Marker::If);
    for (int j = 0; j < 4; ++j)
      CHECK(lhs.at(0, j) == doctest::Approx(a * px.at(0, j) + b * py.at(0, j)).epsilon(1e-9));
  }
}

TEST_CASE("zero translation map sends everything to zero") {
  RelationNet net(make_config(3, 2), 1);
  net.params().find("trans.w")->value.fill(0.0);
  net.params().find("trans.b")->value.fill(0.0);
  nn::Matrix out = net.translate(vec({1.5, -2.5}), Marker::When);
  for (int j = 0; j < 2; ++j) CHECK(out.at(0, j) == 0.0);
}

TEST_CASE("translation matches independent arithmetic at d=2") {
  RelationConfig cfg = make_config(2, 2);
  RelationNet net(cfg, 1);
  nn::Parameter* w = net.params().find("trans.w");
  nn::Parameter* b = net.params().find("trans.b");
  nn::Parameter* zr = net.params().find("rel.but.z");
  double v = -0.3;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) w->value.at(i, j) = v += 0.15;
  b->value.at(0, 0) = 0.05;
  b->value.at(0, 1) = -0.1;
  zr->value.at(0, 0) = 0.7;
  zr->value.at(0, 1) = -0.2;

  const nn::Matrix z_h_r = vec({1.0, 2.0});
  const nn::Matrix got = net.translate(z_h_r, Marker::But);
  const double cat[4] = {1.0, 2.0, 0.7, -0.2};
  for (int j = 0; j < 2; ++j) {
    double expect = b->value.at(0, j);
    for (int i = 0; i < 4; ++i) expect += cat[i] * w->value.at(i, j);
    CHECK(got.at(0, j) == doctest::Approx(expect).epsilon(1e-12));
  }

  // determinism
  CHECK(nn::allclose(net.translate(z_h_r, Marker::But), got, 0.0));
}

TEST_CASE("distance loss hits the pinned arithmetic values") {
  CHECK(distance_loss(vec({1.0, 0.0}), vec({0.0, 0.0})) == 1.0);
  CHECK(distance_loss(vec({3.0, 4.0}), vec({0.0, 0.0})) == 25.0);
  CHECK(distance_loss(vec({2.0, -1.0}), vec({2.0, -1.0})) == 0.0);
}

TEST_CASE("distance loss is symmetric, non-negative, zero iff equal") {
  nn::Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    nn::Matrix a = nn::Matrix::randn(1, 4, 1.0, rng);
    nn::Matrix b = nn::Matrix::randn(1, 4, 1.0, rng);
    const double ab = distance_loss(a, b);
    CHECK(ab == distance_loss(b, a));
    CHECK(ab >= 0.0);
    if (!nn::allclose(a, b, 0.0)) CHECK(ab > 0.0);
    CHECK(distance_loss(a, a) == 0.0);
  }
}

TEST_CASE("ratio loss arithmetic cases") {
  // T = (0,0), z_t_r = (1,0), z_h_r = (2,0), eps = 0 -> 1/4
  RelationNet net(make_config(2, 2), 1);
  net.params().find("trans.w")->value.fill(0.0);
  net.params().find("trans.b")->value.fill(0.0);
  // zero map: T = 0 for any input
  CHECK(ratio_loss(net, vec({2.0, 0.0}), Marker::And, vec({1.0, 0.0}), 0.0) ==
        doctest::Approx(0.25).epsilon(1e-12));

  // zero numerator: translated point equals z_t_r
  CHECK(ratio_loss(net, vec({2.0, 0.0}), Marker::And, vec({0.0, 0.0}), 0.0) == 0.0);

  // degenerate: everything coincides, guard keeps it at 0
  CHECK(ratio_loss(net, vec({0.0, 0.0}), Marker::And, vec({0.0, 0.0}), 1e-8) == 0.0);
}

TEST_CASE("perturbing one marker's parameters leaves the others bit-identical") {
  RelationNet net(make_config(4, 3), 9);
  const nn::Matrix z = vec({0.3, -0.8, 1.1, 0.2});
  std::array<nn::Matrix, kNumMarkers> before;
  for (int m = 0; m < kNumMarkers; ++m)
    before[m] = net.invert(net.translate(net.project(z, kAllMarkers[m]), kAllMarkers[m]),
                           kAllMarkers[m]);

  nn::Parameter* m_and = net.params().find("rel.and.m");
  for (std::size_t i = 0; i < m_and->value.size(); ++i) m_and->value.data()[i] += 0.37;
  nn::Parameter* inv_and = net.params().find("rel.and.inv.w1");
  inv_and->value.at(0, 0) -= 1.25;

  for (int m = 1; m < kNumMarkers; ++m) {
    nn::Matrix after = net.invert(net.translate(net.project(z, kAllMarkers[m]), kAllMarkers[m]),
                                  kAllMarkers[m]);
    CHECK(nn::allclose(after, before[m], 0.0));
  }
  nn::Matrix changed = net.invert(net.translate(net.project(z, Marker::And), Marker::And),
                                  Marker::And);
  CHECK_FALSE(nn::allclose(changed, before[0], 1e-9));
}

TEST_CASE("invert has output dimension k and zero weights give zero") {
  RelationNet net(make_config(5, 3), 2);
  nn::Matrix out = net.invert(vec({0.4, -0.1, 0.9}), Marker::When);
  CHECK(out.rows() == 1);
  CHECK(out.cols() == 5);

  for (const char* name : {"rel.if.inv.w1", "rel.if.inv.b1", "rel.if.inv.w2", "rel.if.inv.b2"})
    net.params().find(name)->value.fill(0.0);
  nn::Matrix zero = net.invert(vec({1.0, 2.0, 3.0}), Marker::If);
  for (int j = 0; j < 5; ++j) CHECK(zero.at(0, j) == 0.0);
}

TEST_CASE("invert matches independent arithmetic with identity-like weights") {
  RelationNet net(make_config(2, 2), 2);
  auto* w1 = net.params().find("rel.when.inv.w1");
  auto* b1 = net.params().find("rel.when.inv.b1");
  auto* w2 = net.params().find("rel.when.inv.w2");
  auto* b2 = net.params().find("rel.when.inv.b2");
  w1->value.fill(0.0);
  w1->value.at(0, 0) = 1.0;
  w1->value.at(1, 1) = 1.0;
  b1->value.fill(0.0);
  w2->value.fill(0.0);
  w2->value.at(0, 0) = 2.0;
  w2->value.at(1, 1) = -3.0;
  b2->value.at(0, 0) = 0.5;
  b2->value.at(0, 1) = 0.25;

  // input (1.5, -0.75): relu keeps 1.5, clamps -0.75 -> hidden (1.5, 0)
  nn::Matrix out = net.invert(vec({1.5, -0.75}), Marker::When);
  CHECK(out.at(0, 0) == doctest::Approx(2.0 * 1.5 + 0.5).epsilon(1e-12));
  CHECK(out.at(0, 1) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("distance and ratio gradients match finite differences at d=k=4") {
  RelationNet net(make_config(4, 4), 31);
  nn::Rng rng(5);
  const nn::Matrix z_h = nn::Matrix::randn(1, 4, 1.0, rng);
  const nn::Matrix z_t = nn::Matrix::randn(1, 4, 1.0, rng);

  auto build = [&](nn::Tape& t, nn::Binding& b) {
    nn::VarId zh = t.constant(z_h);
    nn::VarId zt = t.constant(z_t);
    nn::VarId zh_r = net.build_project(t, b, zh, Marker::Because);
    nn::VarId zt_r = net.build_project(t, b, zt, Marker::Because);
    nn::VarId translated = net.build_translate(t, b, zh_r, Marker::Because);
    nn::VarId dis = build_squared_distance(t, translated, zt_r);
    nn::VarId ratio = build_ratio_loss(t, translated, zh_r, zt_r, 1e-8);
    return t.add(dis, ratio);
  };
  auto r = test_support::check_gradients({&net.params()}, build, 1e-5, 1e-9);
  CAPTURE(r.worst_param);
  CHECK(r.max_rel_err < 1e-3);
}

TEST_CASE("alignment through invert has finite-difference-consistent gradients") {
  RelationNet net(make_config(4, 4), 17);
  nn::Rng rng(23);
  const nn::Matrix z_h = nn::Matrix::randn(1, 4, 1.0, rng);
  const nn::Matrix z_t = nn::Matrix::randn(1, 4, 1.0, rng);

  auto build = [&](nn::Tape& t, nn::Binding& b) {
    nn::VarId zh = t.constant(z_h);
    nn::VarId zt = t.constant(z_t);
    nn::VarId zh_r = net.build_project(t, b, zh, Marker::If);
    nn::VarId translated = net.build_translate(t, b, zh_r, Marker::If);
    nn::VarId z_t_star = net.build_invert(t, b, translated, Marker::If);
    return build_squared_distance(t, z_t_star, zt);
  };
  auto r = test_support::check_gradients({&net.params()}, build, 1e-5, 1e-9);
  CAPTURE(r.worst_param);
  CHECK(r.max_rel_err < 1e-3);
}
