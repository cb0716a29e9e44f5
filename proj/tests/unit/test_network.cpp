#include <doctest.h>

#include <fstream>
#include <functional>

#include "primadnn/checkpoint.hpp"
#include "primadnn/gradcheck.hpp"
#include "primadnn/model.hpp"
#include "test_util.hpp"

using namespace primadnn;

namespace {

using Vec = std::vector<double>;

Vec random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vec v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

Tensor3<double> random_tensor(int c, int r, int t, std::mt19937_64& rng, double scale = 1.0) {
  Tensor3<double> x(c, r, t);
  const Vec v = random_vec(x.size(), rng, scale);
  x.data.assign(v.begin(), v.end());
  return x;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Central differences of f with respect to every entry of `x`, compared
// against `analytic`. Returns the max relative error.
double fd_max_rel(std::span<double> x, std::span<const double> analytic,
                  const std::function<double()>& f, double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * h), 1e-6));
  }
  return worst;
}

ModelConfig small_config() {
  ModelConfig c;
  c.in_channels = 4;
  c.n_mels = 16;
  c.conv_channels = {4, 4, 4, 4};
  c.freq_pool = {2, 2, 2, 2};
  c.lstm_hidden = 6;
  return c;
}

}  // namespace

TEST_CASE("identity kernel reproduces the input") {
  std::mt19937_64 rng(1);
  const auto x = random_tensor(1, 7, 9, rng);
  for (int k : {1, 3, 5}) {
    std::vector<double> w(static_cast<std::size_t>(k * k), 0.0), b{0.0};
    w[static_cast<std::size_t>(k * k / 2)] = 1.0;
    const auto y = conv2d_forward<double>(x, w, b, {1, 1, k, k});
    CHECK(y.same_shape(x));
    CHECK(y.data == x.data);
  }
}

TEST_CASE("zero kernel gives the bias") {
  std::mt19937_64 rng(2);
  const auto x = random_tensor(3, 6, 5, rng);
  std::vector<double> w(2 * 3 * 5 * 5, 0.0), b{0.25, -1.5};
  const auto y = conv2d_forward<double>(x, w, b, {3, 2, 5, 5});
  CHECK(y.channels == 2);
  for (int r = 0; r < 6; ++r)
    for (int t = 0; t < 5; ++t) {
      CHECK(y.at(0, r, t) == 0.25);
      CHECK(y.at(1, r, t) == -1.5);
    }
}

TEST_CASE("conv matches a direct loop and finite differences") {
  std::mt19937_64 rng(3);
  auto x = random_tensor(2, 8, 8, rng);
  const ConvGeometry g{2, 3, 5, 3};
  auto w = random_vec(g.weight_count(), rng);
  auto b = random_vec(3, rng);
  const auto dy = random_tensor(3, 8, 8, rng);

  const auto y = conv2d_forward<double>(x, w, b, g);
  for (int o = 0; o < 3; ++o)
    for (int r = 0; r < 8; ++r)
      for (int t = 0; t < 8; ++t) {
        double acc = b[static_cast<std::size_t>(o)];
        for (int c = 0; c < 2; ++c)
          for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 3; ++j) {
              const int rr = r + i - 2, tt = t + j - 1;
              if (rr < 0 || rr >= 8 || tt < 0 || tt >= 8) continue;
              acc += w[static_cast<std::size_t>(((o * 2 + c) * 5 + i) * 3 + j)] * x.at(c, rr, tt);
            }
        CHECK(y.at(o, r, t) == doctest::Approx(acc).epsilon(1e-12));
      }

  auto loss = [&] { return dot(conv2d_forward<double>(x, w, b, g).data, dy.data); };
  Vec dw(w.size(), 0.0), db(b.size(), 0.0);
  Tensor3<double> dx(2, 8, 8);
  conv2d_backward<double>(x, w, g, dy, dw, db, &dx);
  CHECK(fd_max_rel(w, dw, loss) < 1e-4);
  CHECK(fd_max_rel(b, db, loss) < 1e-4);
  CHECK(fd_max_rel(x.data, dx.data, loss) < 1e-4);
}

TEST_CASE("instance norm examples") {
  const double eps = 1e-5;
  Tensor3<double> c(2, 3, 4, 7.0);
  std::vector<double> gamma{2.0, 3.0}, beta{0.5, -0.25};
  const auto y = instance_norm_forward<double>(c, gamma, beta, eps);
  for (int r = 0; r < 3; ++r)
    for (int t = 0; t < 4; ++t) {
      CHECK(y.at(0, r, t) == 0.5);
      CHECK(y.at(1, r, t) == -0.25);
    }

  Tensor3<double> z(1, 4, 4);
  for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = i % 2 ? 1.0 : -1.0;
  std::vector<double> one{1.0}, zero{0.0};
  const auto zy = instance_norm_forward<double>(z, one, zero, eps);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(zy.data[i] - z.data[i]) < 1e-5);

  std::mt19937_64 rng(4);
  const auto x = random_tensor(3, 10, 12, rng, 4.0);
  for (auto& v : x.data) (void)v;
  std::vector<double> ones(3, 1.0), zeros(3, 0.0);
  auto shifted = x;
  for (int ch = 0; ch < 3; ++ch)
    for (auto& v : shifted.channel(ch)) v += 3.0 + ch;
  const auto n = instance_norm_forward<double>(x, ones, zeros, eps);
  const auto ns = instance_norm_forward<double>(shifted, ones, zeros, eps);
  for (int ch = 0; ch < 3; ++ch) {
    double m = 0.0, v = 0.0;
    for (double a : n.channel(ch)) m += a;
    m /= static_cast<double>(n.plane());
    for (double a : n.channel(ch)) v += (a - m) * (a - m);
    v /= static_cast<double>(n.plane());
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(v - 1.0) < 1e-4);
  }
  for (std::size_t i = 0; i < n.size(); ++i) CHECK(ns.data[i] == doctest::Approx(n.data[i]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("instance norm gradients") {
  std::mt19937_64 rng(5);
  auto x = random_tensor(2, 5, 6, rng);
  auto gamma = random_vec(2, rng), beta = random_vec(2, rng);
  const auto dy = random_tensor(2, 5, 6, rng);
  auto loss = [&] { return dot(instance_norm_forward<double>(x, gamma, beta, 1e-5).data, dy.data); };
  InstanceNormCache<double> cache;
  instance_norm_forward<double>(x, gamma, beta, 1e-5, &cache);
  Vec dg(2, 0.0), dbeta(2, 0.0);
  const auto dx = instance_norm_backward<double>(cache, gamma, dy, dg, dbeta);
  CHECK(fd_max_rel(gamma, dg, loss) < 1e-4);
  CHECK(fd_max_rel(beta, dbeta, loss) < 1e-4);
  CHECK(fd_max_rel(x.data, dx.data, loss) < 1e-4);
}

TEST_CASE("squeeze-and-excitation") {
  std::mt19937_64 rng(6);
  const SeGeometry g = make_se_geometry(4, 2);
  CHECK(g.reduced == 2);
  CHECK_THROWS_AS(make_se_geometry(5, 2), std::invalid_argument);

  auto fc1w = random_vec(8, rng), fc1b = random_vec(2, rng);
  Vec fc2w(8, 0.0), fc2b(4, 0.0);
  auto x = random_tensor(4, 3, 5, rng);
  const auto half = se_forward<double>(x, {fc1w, fc1b, fc2w, fc2b}, g);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(half.data[i] == x.data[i] / 2);

  // Channels 0 and 1 identical, symmetric weights on them.
  auto sym = x;
  std::copy(sym.channel(0).begin(), sym.channel(0).end(), sym.channel(1).begin());
  auto s1w = random_vec(8, rng), s2w = random_vec(8, rng), s2b = random_vec(4, rng);
  for (int j = 0; j < 2; ++j) s1w[static_cast<std::size_t>(j * 4 + 1)] = s1w[static_cast<std::size_t>(j * 4)];
  for (int j = 0; j < 2; ++j) s2w[static_cast<std::size_t>(2 + j)] = s2w[static_cast<std::size_t>(j)];
  s2b[1] = s2b[0];
  SeCache<double> sc;
  se_excitation<double>(sym, {s1w, fc1b, s2w, s2b}, g, sc);
  CHECK(sc.scale[0] == sc.scale[1]);

  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_vec(8, rng, 5.0), bb = random_vec(2, rng, 5.0), c = random_vec(8, rng, 5.0), d = random_vec(4, rng, 5.0);
    SeCache<double> cc;
    se_excitation<double>(random_tensor(4, 3, 5, rng, 3.0), {a, bb, c, d}, g, cc);
    for (double s : cc.scale) {
      CHECK(s > 0.0);
      CHECK(s < 1.0);
    }
  }

  fc2w = random_vec(8, rng);
  fc2b = random_vec(4, rng);
  const auto dy = random_tensor(4, 3, 5, rng);
  auto loss = [&] { return dot(se_forward<double>(x, {fc1w, fc1b, fc2w, fc2b}, g).data, dy.data); };
  SeCache<double> cache;
  se_forward<double>(x, {fc1w, fc1b, fc2w, fc2b}, g, &cache);
  Vec g1w(8, 0.0), g1b(2, 0.0), g2w(8, 0.0), g2b(4, 0.0);
  const auto dx = se_backward<double>(x, cache, {fc1w, fc1b, fc2w, fc2b}, g, dy, {g1w, g1b, g2w, g2b});
  CHECK(fd_max_rel(fc1w, g1w, loss) < 1e-4);
  CHECK(fd_max_rel(fc1b, g1b, loss) < 1e-4);
  CHECK(fd_max_rel(fc2w, g2w, loss) < 1e-4);
  CHECK(fd_max_rel(fc2b, g2b, loss) < 1e-4);
  CHECK(fd_max_rel(x.data, dx.data, loss) < 1e-4);
}

TEST_CASE("frequency max pool routes gradient to the first argmax") {
  Tensor3<double> x(1, 4, 2);
  x.at(0, 0, 0) = 1.0, x.at(0, 1, 0) = 3.0, x.at(0, 2, 0) = 3.0, x.at(0, 3, 0) = 0.0;
  x.at(0, 0, 1) = 2.0, x.at(0, 1, 1) = 2.0, x.at(0, 2, 1) = 2.0, x.at(0, 3, 1) = 2.0;
  std::vector<std::uint8_t> arg;
  const auto y = freq_max_pool<double>(x, 4, &arg);
  CHECK(y.rows == 1);
  CHECK(y.at(0, 0, 0) == 3.0);
  Tensor3<double> dy(1, 1, 2, 1.0);
  const auto dx = freq_max_pool_backward<double>(dy, 4, arg, 4);
  CHECK(dx.at(0, 1, 0) == 1.0);
  CHECK(dx.at(0, 2, 0) == 0.0);
  CHECK(dx.at(0, 0, 1) == 1.0);
  for (int r = 1; r < 4; ++r) CHECK(dx.at(0, r, 1) == 0.0);
}

TEST_CASE("lstm examples") {
  const int D = 3, H = 4, T = 5;
  std::mt19937_64 rng(7);
  Sequence<double> x(D, T);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = random_vec(1, rng)[0];

  Vec zih(4 * H * D, 0.0), zhh(4 * H * H, 0.0), zb(4 * H, 0.0);
  for (bool rev : {false, true}) {
    const auto h = lstm_forward<double>(x, {zih, zhh, zb, D, H}, rev, nullptr);
    CHECK(h.rows() == H);
    CHECK(h.cols() == T);
    CHECK(h.cwiseAbs().maxCoeff() == 0.0);
  }

  auto wih = random_vec(4 * H * D, rng), whh = random_vec(4 * H * H, rng), b = random_vec(4 * H, rng);
  const auto back = lstm_forward<double>(x, {wih, whh, b, D, H}, true, nullptr);
  const Sequence<double> xr = x.rowwise().reverse();
  const Sequence<double> fr = lstm_forward<double>(xr, {wih, whh, b, D, H}, false, nullptr).rowwise().reverse();
  CHECK((back - fr).cwiseAbs().maxCoeff() < 1e-14);

  Sequence<double> dh(H, T);
  for (Eigen::Index i = 0; i < dh.size(); ++i) dh.data()[i] = random_vec(1, rng)[0];
  for (bool rev : {false, true}) {
    auto loss = [&] {
      const auto h = lstm_forward<double>(x, {wih, whh, b, D, H}, rev, nullptr);
      return (h.array() * dh.array()).sum();
    };
    LstmCache<double> cache;
    lstm_forward<double>(x, {wih, whh, b, D, H}, rev, &cache);
    Vec gih(wih.size(), 0.0), ghh(whh.size(), 0.0), gb(b.size(), 0.0);
    const Sequence<double> dx = lstm_backward<double>(x, {wih, whh, b, D, H}, rev, cache, dh, {gih, ghh, gb});
    CHECK(fd_max_rel(wih, gih, loss) < 1e-4);
    CHECK(fd_max_rel(whh, ghh, loss) < 1e-4);
    CHECK(fd_max_rel(b, gb, loss) < 1e-4);
    Vec xv(x.data(), x.data() + x.size());
    Vec dxv(dx.data(), dx.data() + dx.size());
    auto xloss = [&] {
      std::copy(xv.begin(), xv.end(), x.data());
      return loss();
    };
    CHECK(fd_max_rel(xv, dxv, xloss) < 1e-4);
    std::copy(xv.begin(), xv.end(), x.data());
  }
}

TEST_CASE("default model maps 4x160x1000 to 9x1000") {
  const ModelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  const auto params = init_params<float>(cfg, 1);
  std::mt19937_64 rng(8);
  Tensor3<float> x(4, 160, 1000);
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (auto& v : x.data) v = g(rng);
  const auto y = model_forward(x, params);
  CHECK(y.rows() == 9);
  CHECK(y.cols() == 1000);
  CHECK(y.minCoeff() > 0.0f);
  CHECK(y.maxCoeff() < 1.0f);
}

TEST_CASE("model config validation") {
  ModelConfig c;
  c.freq_pool = {4, 4, 2, 4};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.n_classes = 8;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.se_ratio = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.in_channels = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const auto p = init_params<float>(ModelConfig{}, 1);
  CHECK_THROWS(model_forward(Tensor3<float>(3, 160, 10), p));
}

TEST_CASE("zero input and zero output layer give 0.5") {
  auto p = init_params<double>(small_config(), 3);
  for (auto& v : p.block("output.weight")) v = 0.0;
  for (auto& v : p.block("output.bias")) v = 0.0;
  const auto y = model_forward(Tensor3<double>(4, 16, 12), p);
  CHECK((y.array() == 0.5).all());
}

TEST_CASE("activations stay inside (0, 1) over 100 seeded models") {
  ModelConfig cfg;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto p = init_params<double>(cfg, seed);
    std::mt19937_64 rng(seed);
    for (auto& v : p.values) v *= 3.0;
    const auto x = random_tensor(4, 160, 8, rng, 3.0);
    const auto y = model_forward(x, p);
    CHECK(y.minCoeff() > 0.0);
    CHECK(y.maxCoeff() < 1.0);
  }
}

TEST_CASE("time length is preserved for every configuration") {
  std::mt19937_64 rng(9);
  for (bool se : {true, false})
    for (auto norm : {NormKind::kInstance, NormKind::kBatch})
      for (bool k3 : {false, true})
        for (int T : {1, 2, 7, 33}) {
          ModelConfig c = small_config();
          c.se_enabled = se;
          c.norm = norm;
          if (k3) c.kernel_sizes = {{3, 3}, {3, 3}, {3, 3}, {3, 3}};
          const auto p = init_params<double>(c, 5);
          const auto x = random_tensor(4, 16, T, rng);
          const Tensor3<double>* in[] = {&x};
          const auto y = forward_batch<double>(p, in, Phase::kTrain);
          CHECK(y[0].cols() == T);
          CHECK(model_forward(x, p).cols() == T);
        }
}

TEST_CASE("disabled SE is the identity") {
  ModelConfig a = small_config();
  a.se_enabled = false;
  const ParamLayout l(a);
  for (const auto& s : l.specs()) CHECK(s.name.find(".se.") == std::string::npos);
}

TEST_CASE("backward examples") {
  const ModelConfig cfg = small_config();
  const auto p = init_params<double>(cfg, 11);
  std::mt19937_64 rng(12);
  const auto x = random_tensor(4, 16, 10, rng);
  const auto zeros = model_backward(x, p, RowMatrix<double>(RowMatrix<double>::Zero(9, 10)));
  CHECK(zeros.size() == p.values.size());
  for (double g : zeros) CHECK(g == 0.0);

  RowMatrix<double> up(9, 10);
  for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = random_vec(1, rng)[0];
  const auto g1 = model_backward(x, p, up);
  const auto g2 = model_backward(x, p, up);
  CHECK(g1 == g2);
  double norm = 0.0;
  for (double g : g1) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("instance norm makes clips batch independent") {
  const auto p = init_params<float>(small_config(), 13);
  std::mt19937_64 rng(14);
  std::vector<Tensor3<float>> xs;
  for (int i = 0; i < 4; ++i) {
    Tensor3<float> x(4, 16, 9 + i);
    std::normal_distribution<float> g(0.0f, 1.0f + static_cast<float>(i));
    for (auto& v : x.data) v = g(rng);
    xs.push_back(std::move(x));
  }
  for (int i = 0; i < 4; ++i) {
    const Tensor3<float>* alone[] = {&xs[static_cast<std::size_t>(i)]};
    const auto single = forward_batch<float>(p, alone, Phase::kTrain);
    std::vector<const Tensor3<float>*> all;
    for (int j = 0; j < 4; ++j) all.push_back(&xs[static_cast<std::size_t>((i + j) % 4)]);
    const auto batch = forward_batch<float>(p, all, Phase::kTrain);
    CHECK(batch[0] == single[0]);
  }
}

TEST_CASE("batch norm training pools over the batch, inference uses running stats") {
  ModelConfig c = small_config();
  c.norm = NormKind::kBatch;
  auto p = init_params<double>(c, 15);
  CHECK(p.running.size() == p.layout.running_total());
  std::mt19937_64 rng(16);
  const auto a = random_tensor(4, 16, 8, rng), b = random_tensor(4, 16, 8, rng, 4.0);
  const Tensor3<double>* alone[] = {&a};
  const Tensor3<double>* both[] = {&a, &b};
  const auto y1 = forward_batch<double>(p, alone, Phase::kTrain);
  const auto y2 = forward_batch<double>(p, both, Phase::kTrain);
  CHECK((y1[0] - y2[0]).cwiseAbs().maxCoeff() > 1e-6);
  const auto i1 = forward_batch<double>(p, alone, Phase::kInference);
  const auto i2 = forward_batch<double>(p, both, Phase::kInference);
  CHECK(i1[0] == i2[0]);

  ForwardCache<double> cache;
  forward_batch<double>(p, both, Phase::kTrain, &cache);
  const auto before = p.running;
  update_running_stats(p, cache, 0.1);
  CHECK(p.running != before);
}

TEST_CASE("full-model gradient check passes on the tiny configuration") {
  for (auto norm : {NormKind::kInstance, NormKind::kBatch})
    for (bool se : {true, false}) {
      GradcheckOptions o;
      o.config.norm = norm;
      o.config.se_enabled = se;
      const GradcheckReport r = run_gradcheck(o);
      CHECK(r.passed);
      CHECK(r.max_rel_error < 1e-4);
      for (const auto& l : r.layers) {
        INFO(l.name);
        CHECK(l.checked > 0);
        CHECK(l.max_rel_error < 1e-4);
      }
      CHECK(r.layer("focal_loss").passed);
    }
}

TEST_CASE("gradient check catches a corrupted conv gradient") {
  GradcheckOptions o;
  o.tamper = [](const ParamLayout& layout, std::span<double> g) {
    const auto& s = layout.spec("stage0.conv.weight");
    for (std::size_t i = 0; i < s.size; ++i) g[s.offset + i] *= 1.1;
  };
  const GradcheckReport r = run_gradcheck(o);
  CHECK_FALSE(r.passed);
  CHECK(r.layer("conv").max_rel_error > 1e-2);
  CHECK(r.layer("bilstm").max_rel_error < 1e-4);
}

TEST_CASE("gradient check is reproducible") {
  GradcheckOptions o;
  o.seed = 77;
  const GradcheckReport a = run_gradcheck(o), b = run_gradcheck(o);
  REQUIRE(a.blocks.size() == b.blocks.size());
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    CHECK(a.blocks[i].max_rel_error == b.blocks[i].max_rel_error);
    CHECK(a.blocks[i].checked == b.blocks[i].checked);
  }
}

TEST_CASE("checkpoint round trip is exact") {
  testutil::TempDir dir("ckpt");
  for (auto norm : {NormKind::kInstance, NormKind::kBatch}) {
    ModelConfig c = small_config();
    c.norm = norm;
    Checkpoint ck;
    ck.params = init_params<float>(c, 21);
    for (std::size_t i = 0; i < ck.params.running.size(); ++i) ck.params.running[i] = 0.1f * static_cast<float>(i);
    ck.stats = ChannelStats{{"mel2048", "mel1024", "mel512", "pitchgram"}, {-5.5, -6.25, -7.0, 0.0}, {2.0, 2.5, 3.0, 1.0}};
    ck.channels = ck.stats.names;
    ck.focal.alpha = 0.2;
    ck.run_config = {{"note", "x"}};
    save_checkpoint(dir / "m.pdnc", ck);
    const Checkpoint back = load_checkpoint(dir / "m.pdnc");
    CHECK(back.params.config == c);
    CHECK(back.params.values == ck.params.values);
    CHECK(back.params.running == ck.params.running);
    CHECK(back.stats.mean == ck.stats.mean);
    CHECK(back.stats.std == ck.stats.std);
    CHECK(back.channels == ck.channels);
    CHECK(back.focal.alpha == 0.2);
    CHECK(back.run_config == ck.run_config);

    std::ifstream f(dir / "m.pdnc", std::ios::binary);
    char magic[4];
    f.read(magic, 4);
    CHECK(std::string(magic, 4) == "PDNC");
  }
  std::ofstream(dir / "bad.pdnc") << "PDNC garbage";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.pdnc"), InputError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.pdnc"), InputError);
}
