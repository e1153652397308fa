#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "oracles.hpp"
#include "trackforge/classifier.hpp"

using namespace trackforge;

namespace {

FeatureVector vec2(double a, double b) {
  FeatureVector v;
  v[0] = a;
  v[1] = b;
  return v;
}

LabeledSample sample(const FeatureVector& v, bool human) {
  return {v, human ? BinaryLabel::Human : BinaryLabel::NonHuman, std::nullopt, Timestamp{}};
}

// Two well-separated 2D blobs padded to 61 dims.
SampleStore linear_toy(int per_class, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 0.3);
  SampleStore store;
  for (int i = 0; i < per_class; ++i) {
    store.add(sample(vec2(2.0 + noise(rng), 1.0 + noise(rng)), true));
    store.add(sample(vec2(-2.0 + noise(rng), -1.0 + noise(rng)), false));
  }
  return store;
}

double training_accuracy(const ClassifierModel& model, const SampleStore& store) {
  int correct = 0;
  for (const auto& s : store.samples()) {
    const double p = predict_proba(model, s.features);
    if ((s.label == BinaryLabel::Human) == (p > 0.5)) ++correct;
  }
  return static_cast<double>(correct) / store.size();
}

}  // namespace

TEST_CASE("linearly separable toy set trains to full accuracy") {
  std::mt19937_64 rng(11);
  SampleStore store = linear_toy(10, rng);
  ClassifierConfig cfg;
  const ClassifierModel model = train(store, cfg, rng);
  CHECK(training_accuracy(model, store) == 1.0);
  CHECK(model.iteration == 1);
}

TEST_CASE("single-class stores are rejected") {
  std::mt19937_64 rng(12);
  SampleStore store;
  for (int i = 0; i < 5; ++i) store.add(sample(vec2(i, i), true));
  CHECK_THROWS_AS(train(store, ClassifierConfig{}, rng), Error);
}

TEST_CASE("identical feature vectors are rejected as degenerate") {
  std::mt19937_64 rng(13);
  SampleStore store;
  store.add(sample(vec2(1, 1), true));
  store.add(sample(vec2(1, 1), false));
  CHECK_THROWS_AS(train(store, ClassifierConfig{}, rng), Error);
}

TEST_CASE("RBF kernel separates the XOR pattern") {
  std::mt19937_64 rng(14);
  SampleStore store;
  store.add(sample(vec2(0, 0), false));
  store.add(sample(vec2(1, 1), false));
  store.add(sample(vec2(0, 1), true));
  store.add(sample(vec2(1, 0), true));
  ClassifierConfig cfg;
  cfg.C = 10.0;
  cfg.gamma = 0.5;
  const ClassifierModel model = train(store, cfg, rng);
  CHECK(training_accuracy(model, store) == 1.0);
}

TEST_CASE("probability predictions behave on a symmetric set") {
  std::mt19937_64 rng(15);
  SampleStore store = linear_toy(10, rng);
  ClassifierConfig cfg;
  const ClassifierModel model = train(store, cfg, rng);

  CHECK(predict_proba(model, vec2(2.0, 1.0)) > 0.5);   // deep positive
  CHECK(predict_proba(model, vec2(-2.0, -1.0)) < 0.5);  // deep negative
  CHECK(predict_proba(model, vec2(0.0, 0.0)) == Catch::Approx(0.5).margin(0.05));

  // Larger decision value means larger probability.
  CHECK(model.platt_a < 0.0);

  std::uniform_real_distribution<double> wide(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    FeatureVector v;
    for (int d = 0; d < kFeatureDim; ++d) v[d] = wide(rng);
    const double p = predict_proba(model, v);
    CHECK(p >= kMinConfidence);
    CHECK(p <= kMaxConfidence);
  }
}

TEST_CASE("untrained model is the neutral scorer") {
  CHECK(predict_proba(ClassifierModel{}, FeatureVector{}) == 0.5);
}

TEST_CASE("SMO agrees with the projected-gradient dual oracle") {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (int rep = 0; rep < 6; ++rep) {
    const int n = 30;
    std::vector<FeatureVector> x(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < kFeatureDim; ++d) x[i][d] = coord(rng);
      // half separable-ish, half noisy labels
      y[i] = (rep % 2 == 0) ? (x[i][0] > 0 ? 1 : -1) : (rng() % 2 ? 1 : -1);
    }
    if (std::count(y.begin(), y.end(), 1) == 0) y[0] = 1;
    if (std::count(y.begin(), y.end(), -1) == 0) y[1] = -1;

    const double C = 1.0, gamma = 1.0 / kFeatureDim;
    const auto smo = detail::solve_smo(x, y, C, gamma, 1e-5, 2000000);
    const auto pg = oracles::solve_dual_projected_gradient(x, y, C, gamma);

    for (int i = 0; i < n; ++i) {
      const double smo_decision = y[i] * (smo.gradient[i] + 1.0) - smo.rho;
      CHECK(smo_decision == Catch::Approx(pg.decision[i]).margin(1e-3));
    }

    // Dual feasibility of the SMO solution.
    double sum_ya = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(smo.alpha[i] >= -1e-12);
      CHECK(smo.alpha[i] <= C + 1e-12);
      sum_ya += y[i] * smo.alpha[i];
    }
    CHECK(std::abs(sum_ya) < 1e-6);
  }
}

TEST_CASE("trained models satisfy dual feasibility") {
  std::mt19937_64 rng(17);
  SampleStore store = linear_toy(20, rng);
  ClassifierConfig cfg;
  const ClassifierModel model = train(store, cfg, rng);

  REQUIRE(!model.support_vectors.empty());
  double sum_coef = 0.0;
  bool has_pos = false, has_neg = false;
  for (const double c : model.coefficients) {
    CHECK(std::abs(c) <= cfg.C + 1e-12);
    sum_coef += c;
    (c > 0 ? has_pos : has_neg) = true;
  }
  CHECK(std::abs(sum_coef) < 1e-6);  // sum alpha_i y_i = 0
  CHECK(has_pos);                    // at least one support vector per class
  CHECK(has_neg);
}

TEST_CASE("training is deterministic given store and seed") {
  std::mt19937_64 gen(18);
  SampleStore store = linear_toy(15, gen);
  // Unbalanced store so downsampling actually draws.
  for (int i = 0; i < 9; ++i) store.add(sample(vec2(3.0 + 0.01 * i, 2.0), true));

  std::mt19937_64 rng_a(42), rng_b(42), rng_c(43);
  const std::string a = serialize_model(train(store, ClassifierConfig{}, rng_a));
  const std::string b = serialize_model(train(store, ClassifierConfig{}, rng_b));
  const std::string c = serialize_model(train(store, ClassifierConfig{}, rng_c));
  CHECK(a == b);
  CHECK(a != c);  // different downsample, different model
}

TEST_CASE("the scaler freezes after the first training") {
  std::mt19937_64 rng(19);
  SampleStore store = linear_toy(10, rng);
  ClassifierConfig cfg;
  const ClassifierModel first = train(store, cfg, rng);

  SampleStore grown = store;
  for (int i = 0; i < 10; ++i) {
    grown.add(sample(vec2(30.0 + i, 20.0), true));  // would stretch a refitted scaler
    grown.add(sample(vec2(-30.0 - i, -20.0), false));
  }
  const ClassifierModel second = train(grown, cfg, rng, &first);
  CHECK(second.scaler == first.scaler);
  CHECK(second.iteration == 2);
}

TEST_CASE("model serialization round-trips bit-exactly") {
  std::mt19937_64 rng(20);
  SampleStore store = linear_toy(12, rng);
  const ClassifierModel model = train(store, ClassifierConfig{}, rng);

  const std::string blob = serialize_model(model);
  const ClassifierModel loaded = deserialize_model(blob);
  CHECK(serialize_model(loaded) == blob);

  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    FeatureVector v;
    for (int d = 0; d < kFeatureDim; ++d) v[d] = coord(rng);
    CHECK(predict_proba(model, v) == predict_proba(loaded, v));
  }
}

TEST_CASE("corrupt model blobs are rejected") {
  std::mt19937_64 rng(21);
  SampleStore store = linear_toy(8, rng);
  const std::string blob = serialize_model(train(store, ClassifierConfig{}, rng));

  CHECK_THROWS_AS(deserialize_model(blob.substr(0, blob.size() / 2)), Error);
  CHECK_THROWS_AS(deserialize_model(std::string("XXSVM999") + blob.substr(8)), Error);
  CHECK_THROWS_AS(deserialize_model(blob + "extra"), Error);
  CHECK_THROWS_AS(deserialize_model(""), Error);

  try {
    deserialize_model(blob.substr(0, 12));
    FAIL("expected CorruptModel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CorruptModel);
  }
}
