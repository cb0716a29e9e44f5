#include <doctest.h>

#include <set>
#include <sstream>

#include "primadnn/folds.hpp"
#include "primadnn/loss.hpp"
#include "primadnn/radam.hpp"
#include "primadnn/trainer.hpp"
#include "test_util.hpp"

using namespace primadnn;

namespace {

// Scalar oracle in extended precision, written from the cell formula.
long double focal_oracle(long double p, bool positive, long double alpha, long double gamma) {
  const long double pt = positive ? p : 1.0L - p;
  const long double at = positive ? alpha : 1.0L - alpha;
  return -at * std::pow(1.0L - pt, gamma) * std::log(pt);
}

RowMatrix<double> random_acts(int r, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.02, 0.98);
  RowMatrix<double> a(r, c);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = u(rng);
  return a;
}

LabelRoll random_labels(int r, int c, std::mt19937_64& rng) {
  LabelRoll l(r, c);
  for (Eigen::Index i = 0; i < l.size(); ++i) l.data()[i] = static_cast<std::uint8_t>(rng() % 3 == 0);
  return l;
}

ModelConfig toy_model() {
  ModelConfig c;
  c.in_channels = 4;
  c.n_mels = 16;
  c.conv_channels = {4, 4, 4, 4};
  c.freq_pool = {2, 2, 2, 2};
  c.lstm_hidden = 6;
  return c;
}

// Class k is active exactly where mel row 2k carries a strong ridge.
std::vector<TrainingExample> toy_examples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 0.3f);
  std::vector<TrainingExample> out;
  for (int i = 0; i < n; ++i) {
    TrainingExample ex;
    ex.input = Tensor3<float>(4, 16, 24);
    for (auto& v : ex.input.data) v = g(rng);
    ex.labels = LabelRoll::Zero(9, 24);
    for (int k = 0; k < 8; ++k) {
      const int start = static_cast<int>(rng() % 18), len = 2 + static_cast<int>(rng() % 6);
      for (int t = start; t < std::min(24, start + len); ++t) {
        ex.labels(k, t) = 1;
        for (int c = 0; c < 4; ++c) ex.input.at(c, 2 * k, t) += 3.0f;
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TEST_CASE("focal loss cell values") {
  const FocalLossParams p;
  CHECK(p.alpha == 0.13);
  CHECK(p.gamma == 1.33);
  CHECK(focal_cell(0.5, true, p) == doctest::Approx(0.03584).epsilon(1e-3));
  CHECK(focal_cell(0.5, false, p) == doctest::Approx(0.23985).epsilon(1e-4));
  CHECK(focal_cell(0.5, true, p) == doctest::Approx(static_cast<double>(focal_oracle(0.5L, true, 0.13L, 1.33L))).epsilon(1e-14));
  CHECK(focal_cell(0.5, false, p) == doctest::Approx(static_cast<double>(focal_oracle(0.5L, false, 0.13L, 1.33L))).epsilon(1e-14));
  CHECK(focal_cell(1.0 - 1e-7, true, p) < 1e-12);
  CHECK(focal_cell(1.0, true, p) < 1e-12);
  CHECK(std::isfinite(focal_cell(0.0, true, p)));
  CHECK(focal_cell(0.0, true, p) == doctest::Approx(static_cast<double>(focal_oracle(1e-7L, true, 0.13L, 1.33L))));
  CHECK(bce_cell(0.5, true) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(focal_alpha_t(true, p) == 0.13);
  CHECK(focal_alpha_t(false, p) == doctest::Approx(0.87));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
  for (int i = 0; i < 500; ++i) {
    const double q = u(rng);
    const bool pos = rng() % 2;
    CHECK(focal_cell(q, pos, p) == doctest::Approx(static_cast<double>(focal_oracle(q, pos, 0.13L, 1.33L))).epsilon(1e-12));
  }
}

TEST_CASE("focal with gamma 0 and unit weight is BCE") {
  FocalLossParams p{1.0, 0.0, AlphaMode::kConstant};
  std::mt19937_64 rng(2);
  const auto a = random_acts(9, 10, rng);
  const auto l = random_labels(9, 10, rng);
  CHECK(std::abs(focal_loss(a, l, p) - bce_loss(a, l)) < 1e-12);
  RowMatrix<double> g1, g2;
  focal_loss(a, l, p, &g1);
  bce_loss(a, l, &g2);
  CHECK((g1 - g2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("focal is bounded by weighted BCE") {
  const FocalLossParams p;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double q = u(rng);
    const bool pos = rng() % 2;
    const double f = focal_cell(q, pos, p);
    CHECK(f >= 0.0);
    CHECK(f <= focal_alpha_t(pos, p) * bce_cell(q, pos) + 1e-15);
  }
  CHECK(focal_cell(0.3, true, {0.13, 0.0}) == doctest::Approx(0.13 * bce_cell(0.3, true)).epsilon(1e-15));
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(4);
  for (auto kind : {LossKind::kFocal, LossKind::kBce}) {
    const FocalLossParams p;
    auto a = random_acts(9, 10, rng);
    const auto l = random_labels(9, 10, rng);
    RowMatrix<double> g;
    compute_loss(kind, a, l, p, &g);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double keep = a.data()[i], h = 1e-6;
      a.data()[i] = keep + h;
      const double up = compute_loss(kind, a, l, p);
      a.data()[i] = keep - h;
      const double down = compute_loss(kind, a, l, p);
      a.data()[i] = keep;
      const double num = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(num - g.data()[i]) / std::max(std::abs(num), std::abs(g.data()[i])));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("loss gradient honours grad_scale and shape checks") {
  std::mt19937_64 rng(5);
  const auto a = random_acts(9, 4, rng);
  const auto l = random_labels(9, 4, rng);
  RowMatrix<double> g1, g3;
  focal_loss(a, l, {}, &g1, 1.0);
  focal_loss(a, l, {}, &g3, 3.0);
  CHECK((g3 - 3.0 * g1).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS(focal_loss(a, random_labels(9, 5, rng), {}));
}

TEST_CASE("radam constants") {
  CHECK(radam_rho_inf(0.999) == doctest::Approx(1999.0).epsilon(1e-12));
  CHECK(radam_rho(1, 0.999) == doctest::Approx(1.0).epsilon(1e-9));
  int first = 0;
  for (long t = 1; t < 20; ++t) {
    const double b2t = std::pow(0.999, static_cast<double>(t));
    CHECK(radam_rho(t, 0.999) == doctest::Approx(1999.0 - 2.0 * t * b2t / (1.0 - b2t)).epsilon(1e-9));
    if (!first && radam_rho(t, 0.999) > 4.0) first = static_cast<int>(t);
  }
  CHECK(first == 5);
}

TEST_CASE("radam first step is the bias-corrected momentum step") {
  std::vector<double> x{1.0, -2.0, 0.5}, g{0.3, -0.1, 2.0};
  RAdamState st;
  RAdamConfig cfg;
  radam_step<double>(x, g, st, cfg);
  CHECK(st.step == 1);
  CHECK(x[0] == doctest::Approx(1.0 - 1e-3 * 0.3).epsilon(1e-14));
  CHECK(x[1] == doctest::Approx(-2.0 + 1e-3 * 0.1).epsilon(1e-14));
  CHECK(x[2] == doctest::Approx(0.5 - 1e-3 * 2.0).epsilon(1e-14));
}

TEST_CASE("radam follows the rectified update once rho exceeds 4") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  const RAdamConfig cfg;
  std::vector<double> x(5), ref(5), m(5, 0.0), v(5, 0.0);
  for (auto& e : x) e = nd(rng);
  ref = x;
  RAdamState st;
  const double rho_inf = 2.0 / (1.0 - cfg.beta2) - 1.0;
  for (long t = 1; t <= 12; ++t) {
    std::vector<double> g(5);
    for (auto& e : g) e = nd(rng);
    radam_step<double>(x, g, st, cfg);
    const double b1t = std::pow(cfg.beta1, t), b2t = std::pow(cfg.beta2, t);
    const double rho = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
    for (std::size_t i = 0; i < 5; ++i) {
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
      const double mh = m[i] / (1 - b1t);
      if (rho > 4.0) {
        const double r = std::sqrt((rho - 4) * (rho - 2) * rho_inf / ((rho_inf - 4) * (rho_inf - 2) * rho));
        const double vh = std::sqrt(v[i] / (1 - b2t));
        ref[i] -= cfg.learning_rate * r * mh / (vh + cfg.eps);
      } else {
        ref[i] -= cfg.learning_rate * mh;
      }
    }
    for (std::size_t i = 0; i < 5; ++i) CHECK(x[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("radam without rectification is Adam with bias correction") {
  RAdamConfig cfg;
  cfg.rectify = false;
  std::vector<double> x{0.7, -0.2}, ref = x, m(2, 0.0), v(2, 0.0);
  RAdamState st;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (long t = 1; t <= 10; ++t) {
    std::vector<double> g{nd(rng), nd(rng)};
    radam_step<double>(x, g, st, cfg);
    for (std::size_t i = 0; i < 2; ++i) {
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
      ref[i] -= cfg.learning_rate * (m[i] / (1 - std::pow(cfg.beta1, t))) /
                (std::sqrt(v[i] / (1 - std::pow(cfg.beta2, t))) + cfg.eps);
      CHECK(x[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero gradients leave parameters unchanged") {
  std::vector<float> x{1.0f, 2.0f, -3.0f};
  const auto keep = x;
  const std::vector<float> g(3, 0.0f);
  RAdamState st;
  for (int t = 0; t < 20; ++t) radam_step<float>(x, g, st, RAdamConfig{});
  CHECK(x == keep);
}

TEST_CASE("fold plan over 42 singers") {
  std::vector<std::string> singers;
  for (int i = 0; i < 42; ++i) singers.push_back("s" + std::to_string(i));
  const FoldPlan plan = make_fold_plan(singers, 7, 2024);
  REQUIRE(plan.folds() == 7);
  for (const auto& g : plan.groups) CHECK(g.size() == 6);
  std::multiset<std::string> tested;
  for (int f = 0; f < 7; ++f) {
    const FoldSplit s = plan.split(f);
    CHECK(s.train.size() == 30);
    CHECK(s.validation.size() == 6);
    CHECK(s.test.size() == 6);
    CHECK(s.test == plan.groups[static_cast<std::size_t>(f)]);
    CHECK(s.validation == plan.groups[static_cast<std::size_t>((f + 1) % 7)]);
    std::set<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.validation.begin(), s.validation.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 42);
    tested.insert(s.test.begin(), s.test.end());
  }
  CHECK(tested.size() == 42);
  CHECK(std::set<std::string>(tested.begin(), tested.end()).size() == 42);
  for (const auto& s : singers) CHECK(plan.group_of(s) >= 0);
  CHECK(plan.group_of("nobody") == -1);

  CHECK(make_fold_plan(singers, 7, 2024).groups == plan.groups);
  CHECK(make_fold_plan(singers, 7, 2025).groups != plan.groups);
  CHECK_THROWS(make_fold_plan({"a", "b", "c"}, 7, 1));
  CHECK(seeded_permutation(10, 3) == seeded_permutation(10, 3));
}

TEST_CASE("early stopping rule") {
  EarlyStopping es(20);
  int stopped = 0;
  for (int epoch = 1; epoch <= 200 && !stopped; ++epoch) {
    es.update(epoch, epoch <= 25 ? 1.0 / epoch : 1.0 / 25);
    if (es.should_stop()) stopped = epoch;
  }
  CHECK(stopped == 45);
  CHECK(es.best_epoch() == 25);
  CHECK_THROWS(EarlyStopping(0));
}

TEST_CASE("training is deterministic and keeps the best validation epoch") {
  const auto train = toy_examples(6, 1), val = toy_examples(2, 2);
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.max_epochs = 3;
  cfg.seed = 9;
  std::ostringstream log;
  const TrainResult a = train_model(toy_model(), cfg, train, val, &log);
  const TrainResult b = train_model(toy_model(), cfg, train, val);
  REQUIRE(a.step_losses.size() >= 5);
  for (int i = 0; i < 5; ++i) CHECK(a.step_losses[static_cast<std::size_t>(i)] == b.step_losses[static_cast<std::size_t>(i)]);
  CHECK(a.best.values == b.best.values);

  double best = 1e300;
  int best_epoch = 0;
  for (const auto& e : a.epochs)
    if (e.val_loss < best) best = e.val_loss, best_epoch = e.epoch;
  CHECK(a.best_epoch == best_epoch);
  CHECK(evaluate_loss(a.best, val, cfg) == doctest::Approx(best).epsilon(1e-9));

  std::istringstream lines(log.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    ++n;
    for (const char* key : {"\"epoch\"", "\"train_loss\"", "\"val_loss\"", "\"best_so_far\"", "\"wall_ms\""})
      CHECK(line.find(key) != std::string::npos);
  }
  CHECK(n == 3);
  CHECK(a.stop_reason == "max_epochs");
}

TEST_CASE("training loss falls over the first three epochs on a separable toy set") {
  const auto train = toy_examples(16, 3), val = toy_examples(4, 4);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 3;
  cfg.learning_rate = 1e-3;
  const TrainResult r = train_model(toy_model(), cfg, train, val);
  REQUIRE(r.epochs.size() == 3);
  CHECK(r.epochs[1].train_loss < r.epochs[0].train_loss);
  CHECK(r.epochs[2].train_loss < r.epochs[1].train_loss);
}

TEST_CASE("training input validation") {
  const auto ok = toy_examples(2, 5);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  CHECK_THROWS_AS(train_model(toy_model(), cfg, {}, ok), std::invalid_argument);
  CHECK_THROWS_AS(train_model(toy_model(), cfg, ok, {}), std::invalid_argument);
  auto bad = ok;
  bad[0].input.data[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(train_model(toy_model(), cfg, bad, ok), std::runtime_error);
  TrainConfig neg;
  neg.learning_rate = -1.0;
  CHECK_THROWS(neg.validate());
  neg = TrainConfig{};
  neg.patience_epochs = 0;
  CHECK_THROWS(neg.validate());
  CHECK(parse_loss_kind("bce") == LossKind::kBce);
  CHECK(to_string(LossKind::kFocal) == "focal");
  CHECK(TrainConfig{}.batch_size == 16);
}
