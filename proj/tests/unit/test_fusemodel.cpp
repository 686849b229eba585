#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "gradcheck.hpp"
#include "iohfuse/core/errors.hpp"
#include "iohfuse/fusemodel/model.hpp"
#include "tempdir.hpp"

using namespace iohfuse;
using namespace iohfuse::fusemodel;

namespace {

ModelConfig probe_config(bool text = true) {
  ModelConfig c;
  c.p = 3;
  c.d = 16;
  c.E = 1;
  c.n_heads = 2;
  c.eta = 5;
  c.l = 9;
  c.t = 3;
  c.vocab_size = 11;
  c.use_text = text;
  c.mlp_ratio = 2;
  return c;
}

std::vector<double> randn(std::mt19937_64& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

TextInput probe_text() { return {{4, 7, 2, 0, 0}, {1, 1, 1, 0, 0}}; }

nn::Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double sd = 1.0) {
  return nn::Matrix(r, c, randn(rng, r * c, sd));
}

}  // namespace

TEST_CASE("config validation lists every violation") {
  ModelConfig c = probe_config();
  CHECK(c.violations().empty());
  c.l = 10;
  c.R = 1.0;
  c.lambda = 0.0;
  c.n_heads = 3;
  auto v = c.violations();
  CHECK(v.size() >= 4);
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK(model_config_from_json(to_json(probe_config())) == probe_config());
}

TEST_CASE("patchify partitions the series in order") {
  std::vector<double> x(90);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  auto P = patchify(x, 6);
  CHECK(P.rows == 15);
  CHECK(P.cols == 6);
  CHECK(P.data == x);
  auto one = patchify(x, 90);
  CHECK(one.rows == 1);
  CHECK_THROWS_AS(patchify(x, 7), std::invalid_argument);
  auto padded = pad_to_multiple(std::vector<double>{1, 2, 3, 4}, 3);
  CHECK(padded == std::vector<double>{1, 2, 3, 4, 4, 4});
}

TEST_CASE("patch embedding is affine and shared across positions") {
  FusionModel m(probe_config(), 3);
  nn::init_constant(m.params.get("series.patch.b"), 0.0);
  std::mt19937_64 rng(5);
  nn::Matrix patches(3, 3);
  patches.data = randn(rng, 9);
  for (std::size_t j = 0; j < 3; ++j) patches(0, j) = 0.0;
  for (std::size_t j = 0; j < 3; ++j) patches(2, j) = patches(1, j);
  nn::Graph g(false);
  auto tok = embed_patches(g, m, g.constant(patches)).value();
  const auto& pos = m.params.get("series.pos").value;
  for (std::size_t j = 0; j < 16; ++j) {
    CHECK(tok(0, j) == doctest::Approx(pos(0, j)).epsilon(1e-14));
    CHECK(tok(2, j) - pos(2, j) == doctest::Approx(tok(1, j) - pos(1, j)).epsilon(1e-12));
  }
  // Finite-difference Jacobian of token 1 w.r.t. patch 1 equals the projection.
  const auto& W = m.params.get("series.patch.w").value;
  const double h = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    nn::Matrix up = patches, dn = patches;
    up(1, i) += h;
    dn(1, i) -= h;
    nn::Graph g1(false), g2(false);
    auto a = embed_patches(g1, m, g1.constant(up)).value();
    auto b = embed_patches(g2, m, g2.constant(dn)).value();
    for (std::size_t j = 0; j < 16; ++j) CHECK((a(1, j) - b(1, j)) / (2 * h) == doctest::Approx(W(i, j)).epsilon(1e-6));
  }
}

TEST_CASE("mask positions are a seeded uniform subset of size round(R n)") {
  auto a = choose_mask_positions(15, 0.2, 9);
  CHECK(a.size() == 3);
  CHECK(a == choose_mask_positions(15, 0.2, 9));
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 3);
  CHECK(choose_mask_positions(15, 0.0, 9).empty());
  CHECK(choose_mask_positions(20, 0.5, 1).size() == 10);
  // Every position is chosen with frequency near R.
  std::vector<int> hits(15, 0);
  for (std::uint64_t s = 0; s < 3000; ++s) {
    for (auto i : choose_mask_positions(15, 0.2, s)) ++hits[i];
  }
  for (int h : hits) CHECK(std::abs(h / 3000.0 - 0.2) < 0.03);

  FusionModel m(probe_config(), 1);
  std::mt19937_64 rng(2);
  nn::Graph g(false);
  auto toks = g.constant(random_matrix(rng, 4, 16));
  CHECK(mask_tokens(g, m, toks, {}).value() == toks.value());
  std::vector<std::size_t> pos{2};
  auto masked = mask_tokens(g, m, toks, pos).value();
  for (std::size_t j = 0; j < 16; ++j) {
    CHECK(masked(2, j) == m.params.get("mask_token").value(0, j));
    CHECK(masked(1, j) == toks.value()(1, j));
  }
}

TEST_CASE("attention mask is the outer product with the pad indicator") {
  auto M = build_attention_mask(std::vector<std::uint8_t>{1, 1, 0}, 2);
  CHECK(M.data == std::vector<double>{0, 0, 1, 0, 0, 1});
  CHECK(build_attention_mask(std::vector<std::uint8_t>{1, 1, 1, 1}, 3).data == std::vector<double>(12, 0.0));
  CHECK(build_attention_mask(std::vector<std::uint8_t>{0, 0}, 3).data == std::vector<double>(6, 1.0));
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint8_t> mk(1 + rng() % 12);
    for (auto& x : mk) x = rng() % 2;
    const std::size_t ns = 1 + rng() % 9;
    auto R = build_attention_mask(mk, ns);
    for (std::size_t r = 0; r < ns; ++r) {
      for (std::size_t c = 0; c < mk.size(); ++c) CHECK(R(r, c) == 1.0 - mk[c]);
    }
  }
}

TEST_CASE("penalized attention suppresses flagged keys") {
  std::mt19937_64 rng(7);
  const std::size_t nq = 4, nk = 5, dk = 8;
  auto q = random_matrix(rng, nq, dk, 3.0);
  auto k = random_matrix(rng, nk, dk, 3.0);
  nn::Matrix v(nk, nk);
  for (std::size_t i = 0; i < nk; ++i) v(i, i) = 1.0;  // identity values expose the weights
  nn::Matrix flags(nq, nk);
  for (std::size_t r = 0; r < nq; ++r) flags(r, 2) = 1.0;
  nn::Graph g(false);
  auto w = penalized_attention(g, g.constant(q), g.constant(k), g.constant(v), flags, 1e4).value();
  for (std::size_t r = 0; r < nq; ++r) {
    CHECK(w(r, 2) < 1e-6);
    double s = 0.0;
    for (std::size_t c = 0; c < nk; ++c) s += w(r, c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Zero flags reduce to plain scaled dot-product attention.
  nn::Matrix none(nq, nk);
  auto plain = penalized_attention(g, g.constant(q), g.constant(k), g.constant(v), none, 1e4).value();
  for (std::size_t r = 0; r < nq; ++r) {
    std::vector<double> logit(nk);
    double mx = -1e300, z = 0.0;
    for (std::size_t c = 0; c < nk; ++c) {
      for (std::size_t i = 0; i < dk; ++i) logit[c] += q(r, i) * k(c, i);
      logit[c] /= std::sqrt(static_cast<double>(dk));
      mx = std::max(mx, logit[c]);
    }
    for (double x : logit) z += std::exp(x - mx);
    for (std::size_t c = 0; c < nk; ++c) CHECK(plain(r, c) == doctest::Approx(std::exp(logit[c] - mx) / z).epsilon(1e-10));
  }
  // Single query and key: the value passes through.
  auto v1 = random_matrix(rng, 1, 3);
  auto single = penalized_attention(g, g.constant(random_matrix(rng, 1, 3)), g.constant(random_matrix(rng, 1, 3)),
                                    g.constant(v1), nn::Matrix(1, 1), 1e9)
                    .value();
  CHECK(single.data == v1.data);
  // A fully flagged query row outputs zeros.
  nn::Matrix row(nq, nk);
  for (std::size_t c = 0; c < nk; ++c) row(1, c) = 1.0;
  auto z = penalized_attention(g, g.constant(q), g.constant(k), g.constant(v), row, 1e4).value();
  for (std::size_t c = 0; c < nk; ++c) CHECK(z(1, c) == 0.0);
}

TEST_CASE("penalty mass stays below 1e-6 for bounded logits") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    // q = logits, k = identity with dk = nk so that q k^T / sqrt(dk) = logits.
    const std::size_t nk = 6;
    nn::Matrix q(1, nk), k(nk, nk), v(nk, nk);
    for (std::size_t c = 0; c < nk; ++c) {
      q(0, c) = u(rng) * std::sqrt(static_cast<double>(nk));
      k(c, c) = 1.0;
      v(c, c) = 1.0;
    }
    nn::Matrix flags(1, nk);
    std::vector<std::size_t> flagged;
    for (std::size_t c = 0; c + 1 < nk; ++c) {
      if (rng() % 2) {
        flags(0, c) = 1.0;
        flagged.push_back(c);
      }
    }
    nn::Graph g(false);
    auto w = penalized_attention(g, g.constant(q), g.constant(k), g.constant(v), flags, 1e4).value();
    double mass = 0.0;
    for (auto c : flagged) mass += w(0, c);
    CHECK(mass < 1e-6);
  }
}

TEST_CASE("fused text rows vanish at padded positions") {
  FusionModel m(probe_config(), 2);
  std::mt19937_64 rng(3);
  nn::Graph g(false);
  auto s = g.constant(random_matrix(rng, 3, 16));
  auto fused = fuse_text(g, m, s, probe_text()).value();
  CHECK(fused.rows == 5);
  for (std::size_t r = 3; r < 5; ++r) {
    for (std::size_t j = 0; j < 16; ++j) CHECK(fused(r, j) == 0.0);
  }
  double live = 0.0;
  for (std::size_t j = 0; j < 16; ++j) live += std::abs(fused(0, j));
  CHECK(live > 0.0);
}

TEST_CASE("backbone shapes, passthrough and positional sensitivity") {
  auto c = probe_config();
  c.E = 0;
  FusionModel m0(c, 1);
  std::mt19937_64 rng(8);
  auto x = random_matrix(rng, 6, 16);
  {
    nn::Graph g(false);
    auto h = backbone(g, m0, g.constant(x), {}).value();
    auto ref = g.layer_norm(g.constant(x)).value();
    for (std::size_t i = 0; i < h.data.size(); ++i) CHECK(h.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
  }
  FusionModel m(probe_config(), 1);
  std::vector<double> w = randn(rng, 12, 0.5);
  nn::Graph g(false);
  auto text = probe_text();
  auto h = encode_series(g, m, w, &text).value();
  CHECK(h.rows == 4);
  CHECK(h.cols == 16);
  int differs = 0;
  for (int trial = 0; trial < 5; ++trial) {
    auto perm = w;
    std::swap_ranges(perm.begin(), perm.begin() + 3, perm.begin() + 6 + 3 * (trial % 2));
    nn::Graph g2(false);
    auto hp = encode_series(g2, m, perm, &text).value();
    if (hp.data != h.data) ++differs;
  }
  CHECK(differs == 5);
  c = probe_config();
  c.max_seq_len = 6;
  CHECK_THROWS_AS(FusionModel(c, 1), ValidationError);
}

TEST_CASE("padded text positions do not influence series outputs") {
  FusionModel m(probe_config(), 4);
  std::mt19937_64 rng(9);
  auto w = randn(rng, 9, 0.5);
  auto a = probe_text(), b = probe_text();
  b.ids[3] = 9;
  b.ids[4] = 5;
  auto ya = forecast(denormalize(w, m.config), &a, m);
  auto yb = forecast(denormalize(w, m.config), &b, m);
  CHECK(ya == yb);
  b.ids[0] = 8;
  CHECK(forecast(denormalize(w, m.config), &b, m) != ya);
}

TEST_CASE("reconstruction loss is restricted to masked patches") {
  FusionModel m(probe_config(), 6);
  std::mt19937_64 rng(10);
  auto w = randn(rng, 12, 0.5);
  auto text = probe_text();
  std::vector<std::size_t> masked{1};
  nn::Graph g(false);
  auto enc = encode_series(g, m, w, &text, masked);
  auto recon = project_reconstruction(g, m, enc).value();
  double oracle = 0.0;
  for (std::size_t j = 0; j < 3; ++j) oracle += std::pow(recon(1, j) - w[3 + j], 2);
  oracle /= 3.0;
  const double loss = pretrain_loss(g, m, w, &text, masked).value()(0, 0);
  CHECK(loss == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(pretrain_loss(g, m, w, &text, {}).value()(0, 0) == 0.0);

  // Unmasked targets do not enter the loss; they still enter the encoder, so
  // compare against the oracle built from the same input.
  auto w2 = w;
  for (std::size_t j = 0; j < 12; ++j) {
    if (j < 3 || j >= 6) w2[j] += 0.3;
  }
  nn::Graph g2(false);
  auto r2 = project_reconstruction(g2, m, encode_series(g2, m, w2, &text, masked)).value();
  double o2 = 0.0;
  for (std::size_t j = 0; j < 3; ++j) o2 += std::pow(r2(1, j) - w2[3 + j], 2);
  CHECK(pretrain_loss(g2, m, w2, &text, masked).value()(0, 0) == doctest::Approx(o2 / 3.0).epsilon(1e-12));

  // Two-patch fixture with a zero model head: loss is the mean of squared targets.
  auto c = probe_config(false);
  c.l = 3;
  c.t = 3;
  FusionModel z(c, 1);
  nn::init_constant(z.params.get("head.recon.w"), 0.0);
  nn::init_constant(z.params.get("head.recon.b"), 0.0);
  std::vector<double> win{1, 2, 3, 4, 5, 6};
  std::vector<std::size_t> second{1};
  nn::Graph g3(false);
  CHECK(pretrain_loss(g3, z, win, nullptr, second).value()(0, 0) == doctest::Approx((16 + 25 + 36) / 3.0));
  std::vector<double> win2{2, 4, 6, 8, 10, 12};
  CHECK(pretrain_loss(g3, z, win2, nullptr, second).value()(0, 0) == doctest::Approx(4 * (16 + 25 + 36) / 3.0));
}

TEST_CASE("model gradients match central differences") {
  for (bool text : {true, false}) {
    FusionModel m(probe_config(text), 12);
    std::mt19937_64 rng(13);
    for (auto* p : m.params.all()) {
      // Perturb layer norm gains and zero biases so every path is exercised.
      auto extra = randn(rng, p->value.data.size(), 0.1);
      for (std::size_t i = 0; i < extra.size(); ++i) p->value.data[i] += extra[i];
    }
    auto window = randn(rng, 12, 0.7);
    auto hist = randn(rng, 9, 0.7);
    auto target = random_matrix(rng, 1, 3);
    auto tx = probe_text();
    const TextInput* tp = text ? &tx : nullptr;
    std::vector<std::size_t> masked{0, 2};
    auto r = testing::grad_check(
        m.params.all(), [&](nn::Graph& g) { return pretrain_loss(g, m, window, tp, masked); }, 1e-4, 1e-7, 1e-5, 12);
    CHECK(r.failures == 0);
    MESSAGE("pretrain text=" << text << " worst " << r.worst_name << " rel " << r.worst_rel);
    nn::Matrix w(1, 3, 1.0 / 3.0);
    auto f = testing::grad_check(
        m.params.all(),
        [&](nn::Graph& g) { return g.weighted_sq_error(forecast_graph(g, m, hist, tp), target, w); }, 1e-4, 1e-7, 1e-5,
        12);
    CHECK(f.failures == 0);
    MESSAGE("forecast text=" << text << " worst " << f.worst_name << " rel " << f.worst_rel);
  }
}

TEST_CASE("forecast contract, ablated text pathway and checkpoint round trip") {
  FusionModel m(probe_config(), 21);
  FusionModel bare(probe_config(false), 21);
  CHECK(bare.text_param_count() == 0);
  CHECK(m.text_param_count() > 0);
  CHECK(bare.params.scalar_count() < m.params.scalar_count());
  CHECK(bare.series_param_count() == m.series_param_count());
  for (const char* n : {"series.patch.w", "series.pos", "head.forecast.w"}) {
    CHECK(bare.params.get(n).value.same_shape(m.params.get(n).value));
  }
  std::mt19937_64 rng(1);
  auto hist = randn(rng, 9, 10.0);
  for (auto& x : hist) x += 80.0;
  auto text = probe_text();
  auto y = forecast(hist, &text, m);
  CHECK(y.size() == 3);
  CHECK(forecast(hist, &text, m) == y);
  CHECK_THROWS_AS(forecast(std::vector<double>(8, 80.0), &text, m), std::invalid_argument);

  testing::TempDir dir;
  save_model(dir.path() / "m.bin", m, {{"stage", "pretrain"}});
  nlohmann::json extra;
  auto back = load_model(dir.path() / "m.bin", &extra);
  CHECK(extra.at("stage") == "pretrain");
  CHECK(back.config == m.config);
  CHECK(forecast(hist, &text, back) == y);

  auto before = m.params.snapshot();
  m.reinit_series_and_heads(99);
  CHECK(m.params.get("series.patch.w").value != back.params.get("series.patch.w").value);
  CHECK(m.params.get("head.forecast.w").value != back.params.get("head.forecast.w").value);
  CHECK(m.params.get("block0.attn.wq").value == back.params.get("block0.attn.wq").value);
  CHECK(m.params.get("text.embed").value == back.params.get("text.embed").value);
}
