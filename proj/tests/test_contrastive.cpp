#include <cmath>
#include <numbers>

#include "doctest.h"
#include "contrastive_oracle.hpp"
#include "glclef/contrastive.hpp"
#include "test_util.hpp"

using namespace glclef;
using namespace testutil;

TEST_CASE("queue is a FIFO of detached copies") {
  NegativeQueue q(2, 2);
  CHECK(q.empty());
  for (double v : {1.0, 2.0, 3.0}) q.push(Tensor::row({v, v}), Tensor(2, 2, v));
  REQUIRE(q.size() == 2);
  CHECK(q.cls(0)[0] == 2.0);
  CHECK(q.cls(1)[0] == 3.0);
  CHECK(q.tokens(0)[0] == 2.0);
  CHECK(q.tokens(1)[0] == 3.0);

  Tensor src = Tensor::row({5, 6});
  src.set_requires_grad(true);
  q.push(src, Tensor(1, 2, 7.0));
  CHECK_FALSE(q.cls(1).requires_grad());
  src[0] = -1.0;
  CHECK(q.cls(1)[0] == 5.0);
  CHECK(src.requires_grad());

  CHECK_THROWS_AS(q.push(Tensor::row({1, 2, 3}), Tensor(1, 3)), ContractError);
  CHECK_THROWS_AS(q.push(Tensor(2, 2), Tensor(1, 2)), ContractError);
}

TEST_CASE("queue lockstep invariant and zero capacity") {
  Rng rng(1);
  NegativeQueue q(3, 4);
  for (int i = 0; i < 20; ++i) {
    q.push(random_tensor(1, 4, rng), random_tensor(1 + rng.below(4), 4, rng));
    CHECK(q.size() <= 3);
  }
  q.clear();
  CHECK(q.empty());
  NegativeQueue none(0, 4);
  none.push(random_tensor(1, 4, rng), random_tensor(2, 4, rng));
  CHECK(none.empty());
}

TEST_CASE("queue push from an encoder output leaves it untouched") {
  Tape tape;
  Tensor cls = Tensor::row({1, 2});
  Tensor tok = Tensor(3, 2, 0.5);
  EncOutput enc{tape.leaf(cls), tape.leaf(tok), tape.constant(Tensor(1, 2))};
  NegativeQueue q(4, 2);
  q.push(enc);
  CHECK(enc.h_cls.value().same_values(cls));
  CHECK(q.tokens(0).same_values(tok));
}

TEST_CASE("similarity examples") {
  const double e1[] = {1, 0}, e2[] = {0, 1};
  CHECK(sim(e1, e1, {1.0, true}) == doctest::Approx(2.718282).epsilon(1e-6));
  CHECK(sim(e1, e2, {1.0, true}) == 1.0);
  const double half[] = {0.5, std::sqrt(0.75)};
  const double v = sim(e1, half, {0.07, true});
  // exp(0.5 / 0.07) = 1265.0376...
  CHECK(std::abs(v / 1265.0376 - 1.0) < 1e-3);
  CHECK(std::abs(v - std::exp(0.5 / 0.07)) <= 1e-9 * v);
  const double zero[] = {0, 0};
  CHECK_THROWS_AS(sim(e1, zero, {1.0, true}), ContractError);
  const double three[] = {1, 2, 3};
  CHECK_THROWS_AS(sim(e1, three, {1.0, true}), DimensionError);
  // Without normalization the raw dot product is used.
  const double two[] = {2, 0};
  CHECK(sim(two, two, {1.0, false}) == doctest::Approx(std::exp(4.0)));
}

TEST_CASE("empty queue makes every loss exactly zero") {
  Rng rng(2);
  Tape tape;
  const NegativeQueue empty(4, 5);
  const Var ac = tape.constant(random_tensor(1, 5, rng));
  const Var pc = tape.constant(random_tensor(1, 5, rng));
  const Var at = tape.constant(random_tensor(3, 5, rng));
  const Var pt = tape.constant(random_tensor(3, 5, rng));
  CHECK(loss_li(ac, pc, empty, {}).scalar() == 0.0);
  CHECK(loss_ls(at, pt, empty, {}).scalar() == 0.0);
  CHECK(loss_gis(ac, at, pt, empty, {}).scalar() == 0.0);
}

TEST_CASE("equal similarities give log(K + 1)") {
  for (std::size_t k : {1u, 3u, 7u}) {
    Tape tape;
    const Tensor v = Tensor::row({0.3, -0.4, 1.2});
    NegativeQueue q(k, 3);
    for (std::size_t i = 0; i < k; ++i) q.push(v, v);
    const double li = loss_li(tape.constant(v), tape.constant(v), q, {}).scalar();
    CHECK(std::abs(li - std::log(static_cast<double>(k + 1))) <= 1e-9);
    // n = 1 token-level version reduces to the same value.
    const double ls = loss_ls(tape.constant(v), tape.constant(v), q, {}).scalar();
    CHECK(std::abs(ls - std::log(static_cast<double>(k + 1))) <= 1e-9);
  }
}

TEST_CASE("losses match direct double-sum evaluation") {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 2 + rng.below(5), n = 1 + rng.below(4), k = rng.below(5);
    const bool normalize = trial % 4 != 3;
    const SimilarityConfig cfg{normalize ? 0.07 : 0.9, normalize};
    const Instance in = random_instance(rng, d, n, k, trial % 2 == 0);
    Tape tape;
    const Var ac = tape.constant(in.a_cls), pc = tape.constant(in.p_cls);
    const Var at = tape.constant(in.a_tok), pt = tape.constant(in.p_tok);

    const double li = loss_li(ac, pc, in.queue, cfg).scalar();
    const double li_ref = li_direct(rows_of(in.a_cls)[0], rows_of(in.p_cls)[0], in.neg_cls, cfg.temperature, normalize);
    CHECK(std::abs(li - li_ref) <= 1e-9 * std::max(1.0, std::abs(li_ref)));

    const double ls = loss_ls(at, pt, in.queue, cfg).scalar();
    const double ls_ref = ls_direct(rows_of(in.a_tok), rows_of(in.p_tok), in.neg_tokens, cfg.temperature, normalize);
    CHECK(std::abs(ls - ls_ref) <= 1e-9 * std::max(1.0, std::abs(ls_ref)));

    const double gis = loss_gis(ac, at, pt, in.queue, cfg).scalar();
    const double gis_ref = gis_direct(rows_of(in.a_cls)[0], rows_of(in.a_tok), rows_of(in.p_tok), in.neg_tokens,
                                      cfg.temperature, normalize);
    CHECK(std::abs(gis - gis_ref) <= 1e-9 * std::max(1.0, std::abs(gis_ref)));

    const double aligned_ref =
        ls_aligned_direct(rows_of(in.a_tok), rows_of(in.p_tok), in.neg_tokens, cfg.temperature, normalize);
    const double aligned = loss_ls(at, pt, in.queue, cfg, true).scalar();
    CHECK(std::abs(aligned - aligned_ref) <= 1e-9 * std::max(1.0, std::abs(aligned_ref)));
  }
}

TEST_CASE("losses are non-negative") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Instance in = random_instance(rng, 4, 3, 1 + rng.below(4), true);
    Tape tape;
    const Var ac = tape.constant(in.a_cls), pc = tape.constant(in.p_cls);
    const Var at = tape.constant(in.a_tok), pt = tape.constant(in.p_tok);
    CHECK(loss_li(ac, pc, in.queue, {}).scalar() >= 0.0);
    CHECK(loss_ls(at, pt, in.queue, {}).scalar() >= 0.0);
    CHECK(loss_gis(ac, at, pt, in.queue, {}).scalar() >= 0.0);
  }
}

TEST_CASE("identical anchor and positive tokens make the two global halves equal") {
  Rng rng(9);
  const Instance in = random_instance(rng, 4, 3, 3, false);
  Tape tape;
  const Var ac = tape.constant(in.a_cls);
  const Var at = tape.constant(in.a_tok);
  const double gis = loss_gis(ac, at, at, in.queue, {}).scalar();
  const double half = position_sum_direct(rows_of(in.a_cls)[0], rows_of(in.a_tok), in.neg_tokens, 0.07, true);
  CHECK(std::abs(gis - 2.0 * half) <= 1e-9);
}

TEST_CASE("token count mismatch is a contract error") {
  Tape tape;
  const NegativeQueue q(1, 2);
  CHECK_THROWS_AS(loss_ls(tape.constant(Tensor(2, 2, 1.0)), tape.constant(Tensor(3, 2, 1.0)), q, {}),
                  ContractError);
  CHECK_THROWS_AS(loss_li(tape.constant(Tensor(1, 3, 1.0)), tape.constant(Tensor(1, 3, 1.0)), q, {}),
                  ContractError);
}

TEST_CASE("losses fall as the positive pair aligns") {
  Rng rng(13);
  NegativeQueue q(3, 2);
  for (int i = 0; i < 3; ++i) q.push(random_tensor(1, 2, rng), random_tensor(1, 2, rng));
  const Tensor anchor = Tensor::row({1, 0});
  double prev_li = -1, prev_ls = -1, prev_gis = -1;
  // Rotating the positive towards the anchor raises the positive dot product.
  for (int step = 0; step <= 20; ++step) {
    const double theta = std::numbers::pi * (1.0 - step / 20.0) * 0.95;
    const Tensor pos = Tensor::row({std::cos(theta), std::sin(theta)});
    Tape tape;
    const Var a = tape.constant(anchor), p = tape.constant(pos);
    const double li = loss_li(a, p, q, {}).scalar();
    const double ls = loss_ls(a, p, q, {}).scalar();
    const double gis = loss_gis(a, a, p, q, {}).scalar();
    if (step > 0) {
      CHECK(li < prev_li);
      CHECK(ls < prev_ls);
      CHECK(gis < prev_gis);
    }
    prev_li = li;
    prev_ls = ls;
    prev_gis = gis;
  }
}

TEST_CASE("normalized losses are invariant to positive rescaling") {
  Rng rng(17);
  const Instance in = random_instance(rng, 5, 3, 4, true);
  auto all = [&](double sa, double sp) {
    Tape tape;
    Tensor ac = in.a_cls, at = in.a_tok, pt = in.p_tok, pc = in.p_cls;
    for (auto* t : {&ac, &at})
      for (double& v : t->values()) v *= sa;
    for (auto* t : {&pt, &pc})
      for (double& v : t->values()) v *= sp;
    const Var vac = tape.constant(ac), vpc = tape.constant(pc), vat = tape.constant(at), vpt = tape.constant(pt);
    return std::array<double, 3>{loss_li(vac, vpc, in.queue, {}).scalar(), loss_ls(vat, vpt, in.queue, {}).scalar(),
                                 loss_gis(vac, vat, vpt, in.queue, {}).scalar()};
  };
  const auto base = all(1.0, 1.0);
  const auto scaled = all(3.5, 0.02);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(base[i] - scaled[i]) <= 1e-12 * std::max(1.0, base[i]));
}

TEST_CASE("no gradient reaches the producer of queued entries") {
  Rng rng(19);
  Tensor producer = random_tensor(3, 4, rng);
  producer.set_requires_grad(true);
  NegativeQueue q(4, 4);
  {
    Tape tape;
    const Var w = tape.leaf(producer);
    for (int i = 0; i < 4; ++i) {
      const Var x = tape.constant(random_tensor(2, 3, rng));
      const Var t = tanh(matmul(x, w));
      q.push(slice_rows(t, 0, 1).value(), t.value());
    }
  }
  Tensor anchor = random_tensor(2, 4, rng);
  Tensor positive = random_tensor(2, 4, rng);
  anchor.set_requires_grad(true);
  Tape tape;
  const Var a = tape.leaf(anchor);
  const Var p = tape.leaf(positive);
  const Var c = slice_rows(a, 0, 1);
  tape.backward(add(add(loss_li(c, slice_rows(p, 0, 1), q, {}), loss_ls(a, p, q, {})), loss_gis(c, a, p, q, {})));
  for (double g : producer.grad()) CHECK(g == 0.0);
  double norm = 0.0;
  for (double g : anchor.grad()) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("contrastive gradients match finite differences") {
  Rng rng(23);
  const std::size_t d = 8, n = 4, k = 4;
  Instance in = random_instance(rng, d, n, k, true);
  auto check = [&](const char* name, const std::function<Var(Tape&)>& fn, std::vector<Tensor*> ps) {
    INFO(name);
    const FiniteDiffReport r = finite_diff_check(fn, ps, 1e-5, 1e-4);
    INFO(r.worst);
    CHECK(r.passed);
  };
  check("li", [&](Tape& t) { return loss_li(t.leaf(in.a_cls), t.leaf(in.p_cls), in.queue, {}); },
        {&in.a_cls, &in.p_cls});
  check("ls", [&](Tape& t) { return loss_ls(t.leaf(in.a_tok), t.leaf(in.p_tok), in.queue, {}); },
        {&in.a_tok, &in.p_tok});
  check("ls aligned", [&](Tape& t) { return loss_ls(t.leaf(in.a_tok), t.leaf(in.p_tok), in.queue, {}, true); },
        {&in.a_tok, &in.p_tok});
  check("gis", [&](Tape& t) { return loss_gis(t.leaf(in.a_cls), t.leaf(in.a_tok), t.leaf(in.p_tok), in.queue, {}); },
        {&in.a_cls, &in.a_tok, &in.p_tok});
  check("unnormalized",
        [&](Tape& t) {
          return loss_gis(t.leaf(in.a_cls), t.leaf(in.a_tok), t.leaf(in.p_tok), in.queue, {0.5, false});
        },
        {&in.a_cls, &in.a_tok, &in.p_tok});
}
