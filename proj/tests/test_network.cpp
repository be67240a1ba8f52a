// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The clup Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include "clup/model_file.hpp"
#include "clup/network.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace clup;

namespace {

Mlp<double> single_layer(Matrix<double> w, Vector<double> b) {
  Mlp<double> net;
  net.weights.push_back(std::move(w));
  net.biases.push_back(std::move(b));
  return net;
}

}  // namespace

TEST_CASE("forward: ReLU on hidden layers, identity on the output") {
  Matrix<double> x(1, 2);
  x << 1, -2;
  auto out_layer = single_layer(Matrix<double>::Identity(2, 2), Vector<double>::Zero(2));
  const auto y = forward(out_layer, x);
  CHECK(y(0, 0) == 1.0);
  CHECK(y(0, 1) == -2.0);

  auto hidden = out_layer;
  hidden.weights.push_back(Matrix<double>::Identity(2, 2));
  hidden.biases.push_back(Vector<double>::Zero(2));
  const auto h = forward(hidden, x);
  CHECK(h(0, 0) == 1.0);
  CHECK(h(0, 1) == 0.0);
}

TEST_CASE("forward: zero parameters give zero output") {
  Mlp<float> net;
  net.weights = {Matrix<float>::Zero(4, 3), Matrix<float>::Zero(2, 4)};
  net.biases = {Vector<float>::Zero(4), Vector<float>::Zero(2)};
  std::mt19937_64 rng(1);
  const Matrix<float> x = gradcheck::random_matrix(5, 3, rng).cast<float>();
  CHECK(forward(net, x).isZero(0.0));
}

TEST_CASE("forward matches the loop oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Index dims[] = {5, 7, 3};
    auto net = make_mlp<double>(dims, seed);
    for (auto& b : net.biases) b = gradcheck::random_matrix(b.size(), 1, rng);
    const Matrix<double> x = gradcheck::random_matrix(6, 5, rng);
    const auto got = forward(net, x);
    const auto want = gradcheck::oracle_features(net, x);
    for (Index i = 0; i < 6; ++i)
      for (Index j = 0; j < 3; ++j) CHECK(std::abs(got(i, j) - want[i][j]) < 1e-6);

    // Float storage agrees with the double oracle to float precision.
    const auto got_f = forward(net.cast<float>(), x.cast<float>());
    const auto want_f = gradcheck::oracle_features(net.cast<float>().cast<double>(), x.cast<float>().cast<double>());
    for (Index i = 0; i < 6; ++i)
      for (Index j = 0; j < 3; ++j) CHECK(std::abs(got_f(i, j) - want_f[i][j]) < 1e-5);
  }
}

TEST_CASE("forward rejects a width mismatch") {
  const Index dims[] = {3, 2};
  const auto net = make_mlp<float>(dims, 0);
  try {
    forward(net, Matrix<float>::Zero(2, 4));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    CHECK(what.find('4') != std::string::npos);
    CHECK(what.find('3') != std::string::npos);
  }
}

TEST_CASE("softmax") {
  Matrix<double> l(2, 3);
  l << 0, 0, 0, 1000, 0, -1000;
  const auto p = softmax_rows(l);
  for (Index j = 0; j < 3; ++j) CHECK(p(0, j) == doctest::Approx(1.0 / 3.0));
  CHECK(p(1, 0) == doctest::Approx(1.0));
  CHECK(p(1, 1) < 1e-300);
  CHECK(p.allFinite());

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    SoftmaxHead<float> head{gradcheck::random_matrix(7, 4, rng).cast<float>(),
                            gradcheck::random_matrix(7, 1, rng).cast<float>()};
    const Matrix<float> z = gradcheck::random_matrix(5, 4, rng, 3.0).cast<float>();
    const auto c = classify(head, z);
    for (Index i = 0; i < 5; ++i) {
      oracle::Vec logits(7);
      for (Index n = 0; n < 7; ++n) {
        long double s = head.bias(n);
        for (Index k = 0; k < 4; ++k) s += static_cast<long double>(head.weight(n, k)) * z(i, k);
        logits[n] = static_cast<double>(s);
      }
      const auto want = oracle::softmax(logits);
      double sum = 0.0;
      for (Index n = 0; n < 7; ++n) {
        CHECK(std::abs(c.probs(i, n) - want[n]) < 1e-6);
        CHECK(c.probs(i, n) > 0.0);
        sum += c.probs(i, n);
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("cross entropy") {
  Matrix<double> one_hot(1, 3);
  one_hot << 0, 1, 0;
  const std::uint32_t t1[] = {1};
  CHECK(cross_entropy(one_hot, t1).value == 0.0);

  const Matrix<double> uniform = Matrix<double>::Constant(1, 7, 1.0 / 7.0);
  const std::uint32_t t0[] = {0};
  CHECK(cross_entropy(uniform, t0).value == doctest::Approx(1.945910).epsilon(1e-6));

  Matrix<double> two(2, 2);
  two << 0.5, 0.5, 0.75, 0.25;
  const std::uint32_t t01[] = {0, 1};
  CHECK(cross_entropy(two, t01).value == doctest::Approx(1.039721).epsilon(1e-6));

  Matrix<double> zero(1, 2);
  zero << 1.0, 0.0;
  const auto r = cross_entropy(zero, t1);
  CHECK(r.clamped == 1);
  CHECK(r.value == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("classifier gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(gradcheck::classifier_max_error(seed) < 1e-4);
}

TEST_CASE("backward_step") {
  std::mt19937_64 rng(5);
  const Index dims[] = {3, 5, 4};
  const auto net0 = make_mlp<double>(dims, 1);
  const auto head0 = make_head<double>(2, 4, 2);
  const Matrix<double> x = gradcheck::random_matrix(8, 3, rng);
  const std::vector<std::uint32_t> y{0, 1, 1, 0, 1, 0, 0, 1};

  SUBCASE("lr = 0 leaves parameters unchanged") {
    auto net = net0;
    auto head = head0;
    MomentumState<double> state;
    backward_step(net, head, state, x, y, 0.0, 0.9);
    CHECK(net == net0);
    CHECK(head == head0);
  }
  SUBCASE("momentum = 0 is plain SGD") {
    auto net = net0;
    auto head = head0;
    MomentumState<double> state;
    const auto g = classifier_gradients(net0, head0, x, y);
    backward_step(net, head, state, x, y, 0.1, 0.0);
    for (std::size_t l = 0; l < 2; ++l) {
      CHECK(net.weights[l] == Matrix<double>(net0.weights[l] - 0.1 * g.net.weights[l]));
      CHECK(net.biases[l] == Vector<double>(net0.biases[l] - 0.1 * g.net.biases[l]));
    }
    CHECK(head.weight == Matrix<double>(head0.weight - 0.1 * g.head.weight));
  }
  SUBCASE("a small step reduces the loss and reports the pre-update loss") {
    auto net = net0;
    auto head = head0;
    MomentumState<double> state;
    const double before = classifier_gradients(net0, head0, x, y).loss.value;
    CHECK(backward_step(net, head, state, x, y, 1e-3, 0.9).value == before);
    CHECK(classifier_gradients(net, head, x, y).loss.value < before);
  }
  SUBCASE("frozen extractor") {
    auto net = net0;
    auto head = head0;
    MomentumState<double> state;
    backward_step(net, head, state, x, y, 0.1, 0.9, true);
    CHECK(net == net0);
    CHECK_FALSE(head == head0);
  }
}

TEST_CASE("cosine_lr") {
  CHECK(cosine_lr(0, 100, 0.1, 0.01) == doctest::Approx(0.1));
  CHECK(cosine_lr(100, 100, 0.1, 0.01) == doctest::Approx(0.01));
  CHECK(cosine_lr(50, 100, 0.1, 0.01) == doctest::Approx(0.055));
  CHECK_THROWS_AS(cosine_lr(101, 100, 0.1, 0.0), RangeError);
  CHECK_THROWS_AS(cosine_lr(0, 0, 0.1, 0.0), RangeError);
  for (std::size_t t = 0; t < 37; ++t) CHECK(cosine_lr(t + 1, 37, 0.3, 0.0) <= cosine_lr(t, 37, 0.3, 0.0));
}

TEST_CASE("train_classifier") {
  // Two linearly separable blobs in 2D.
  std::mt19937_64 rng(9);
  std::normal_distribution<float> normal(0.0f, 0.5f);
  FeatureSet data;
  data.data.resize(100, 2);
  Labels labels;
  for (Index i = 0; i < 100; ++i) {
    const bool pos = i % 2 == 0;
    data.data(i, 0) = (pos ? 2.0f : -2.0f) + normal(rng);
    data.data(i, 1) = normal(rng);
    labels.push_back(pos ? 1 : 0);
  }
  data.labels = labels;
  const Index dims[] = {2, 8, 4};
  const auto net0 = make_mlp<float>(dims, 3);
  const auto head0 = make_head<float>(2, 4, 4);

  SUBCASE("epochs = 0 is rejected") {
    auto net = net0;
    auto head = head0;
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(train_classifier(net, head, data, cfg), ConfigError);
  }
  SUBCASE("lr0 = 0 leaves the initialisation") {
    auto net = net0;
    auto head = head0;
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.lr0 = 0.0;
    const auto log = train_classifier(net, head, data, cfg);
    CHECK(log.size() == 1);
    CHECK(net == net0);
    CHECK(head == head0);
  }
  SUBCASE("separable toy reaches 100% after 200 epochs") {
    auto net = net0;
    auto head = head0;
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.seed = 1;
    const auto log = train_classifier(net, head, data, cfg);
    CHECK(log.size() == 200);
    const auto pred = predict(net, head, data.data);
    CHECK(pred == labels);
  }
  SUBCASE("same seed gives identical parameters") {
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 42;
    auto a = net0, b = net0;
    auto ha = head0, hb = head0;
    train_classifier(a, ha, data, cfg);
    train_classifier(b, hb, data, cfg);
    CHECK(a == b);
    CHECK(ha == hb);
  }
  SUBCASE("frozen extractor trains only the head") {
    auto net = net0;
    auto head = head0;
    TrainConfig cfg;
    cfg.epochs = 3;
    train_classifier(net, head, data, cfg, true);
    CHECK(net == net0);
    CHECK_FALSE(head == head0);
  }
  SUBCASE("unlabelled or empty data is rejected") {
    auto net = net0;
    auto head = head0;
    FeatureSet unlabelled{data.data, std::nullopt};
    CHECK_THROWS(train_classifier(net, head, unlabelled, TrainConfig{}));
    FeatureSet empty;
    empty.data.resize(0, 2);
    empty.labels = Labels{};
    CHECK_THROWS(train_classifier(net, head, empty, TrainConfig{}));
  }
}

TEST_CASE("argmax ties go to the lowest index") {
  Matrix<double> m(2, 3);
  m << 1, 1, 0, 0, 2, 2;
  CHECK(argmax_rows(m) == Labels{0, 1});
}

TEST_CASE("model container") {
  const Index dims[] = {4, 6, 3};
  Classifier c{make_mlp<float>(dims, 1), make_head<float>(5, 3, 2)};
  c.head.bias(2) = 0.25f;
  const auto bytes = encode_model(pack_classifier(c));
  CHECK(std::memcmp(bytes.data(), "CMDL", 4) == 0);
  const auto back = unpack_classifier(decode_model(bytes));
  CHECK(back.extractor == c.extractor);
  CHECK(back.head == c.head);

  auto bad = bytes;
  bad[0] = 'X';
  bad.back() ^= static_cast<std::uint8_t>('X' ^ 'C');
  CHECK_THROWS_AS(decode_model(bad), BadMagicError);
  CHECK_THROWS_AS(decode_model(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 9)), TruncatedError);
  auto flipped = bytes;
  flipped[20] ^= 1;
  CHECK_THROWS_AS(decode_model(flipped), ChecksumError);

  const auto dir = oracle::temp_dir("model_file");
  save_model(pack_classifier(c), dir / "m.cmdl");
  CHECK(encode_model(load_model(dir / "m.cmdl")) == bytes);
}
