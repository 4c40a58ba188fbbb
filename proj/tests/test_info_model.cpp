#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "simt/info_model.hpp"

using namespace simt;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

}  // namespace

TEST_CASE("quantizer with zero weights emits exactly 1.0") {
  std::mt19937_64 rng(7);
  InfoQuantizer q("q", 6);  // zero-weight placeholder ctor
  Tape t;
  Tensor infos = q.infos(t, t.constant(random_matrix(5, 6, rng)));
  REQUIRE(infos.rows() == 5);
  REQUIRE(infos.cols() == 1);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(infos.value()(i, 0) == 1.0);
}

TEST_CASE("quantizer outputs stay strictly inside (0, 2)") {
  std::mt19937_64 rng(11);
  InfoQuantizer q("q", 8, rng);
  // Exaggerate the last layer to push sigmoid toward saturation.
  q.w3.value *= 50.0;
  Tape t;
  Tensor infos = q.infos(t, t.constant(100.0 * random_matrix(1000, 8, rng)));
  for (Eigen::Index i = 0; i < infos.rows(); ++i) {
    CHECK(infos.value()(i, 0) > 0.0);
    CHECK(infos.value()(i, 0) < 2.0);
  }
}

TEST_CASE("quantizer info sum has finite-difference-consistent gradients") {
  std::mt19937_64 rng(23);
  InfoQuantizer q("q", 5, rng);
  Matrix x0 = random_matrix(4, 5, rng);

  auto loss_value = [&](const Matrix& x) {
    Tape t;
    return sum_all(q.infos(t, t.constant(x))).scalar();
  };

  Tape t;
  Tensor x = t.leaf(x0);
  Tensor loss = sum_all(q.infos(t, x));
  t.backward(loss);

  const double h = 1e-5;
  for (Eigen::Index i = 0; i < x0.rows(); ++i)
    for (Eigen::Index j = 0; j < x0.cols(); ++j) {
      Matrix up = x0, dn = x0;
      up(i, j) += h;
      dn(i, j) -= h;
      const double fd = (loss_value(up) - loss_value(dn)) / (2 * h);
      const double got = x.grad()(i, j);
      CAPTURE(i);
      CAPTURE(j);
      CHECK(std::abs(got - fd) < 1e-6 * std::max({1.0, std::abs(fd), std::abs(got)}));
    }
}

TEST_CASE("quantizer rejects mismatched widths") {
  std::mt19937_64 rng(3);
  InfoQuantizer q("q", 4, rng);
  Tape t;
  CHECK_THROWS_AS(q.infos(t, t.constant(Matrix::Ones(3, 5))), std::invalid_argument);
}

TEST_CASE("info sum loss is zero when both masked sums hit zeta") {
  Tape t;
  // Markers at the last position are excluded by the keep vectors.
  Tensor is = t.constant((Matrix(4, 1) << 1.5, 0.5, 1.0, 0.7).finished());
  Tensor it = t.constant((Matrix(3, 1) << 2.0, 1.0, 0.3).finished());
  Tensor loss = info_sum_loss(is, {1, 1, 1, 0}, it, {1, 1, 0}, 3.0);
  CHECK(loss.scalar() == 0.0);
}

TEST_CASE("info sum loss adds both sides' deviations") {
  Tape t;
  Tensor is = t.constant((Matrix(2, 1) << 1.0, 1.5).finished());  // sum 2.5
  Tensor it = t.constant((Matrix(2, 1) << 0.5, 0.5).finished());  // sum 1.0
  // |2.5 - 2| + |1 - 2| = 1.5
  CHECK(info_sum_loss(is, {1, 1}, it, {1, 1}, 2.0).scalar() == doctest::Approx(1.5));
}

TEST_CASE("info sum loss is symmetric in the two sides") {
  Tape t1, t2;
  Matrix a = (Matrix(3, 1) << 0.4, 1.2, 1.9).finished();
  Matrix b = (Matrix(2, 1) << 0.9, 1.1).finished();
  const double l1 =
      info_sum_loss(t1.constant(a), {1, 1, 1}, t1.constant(b), {1, 1}, 1.7).scalar();
  const double l2 =
      info_sum_loss(t2.constant(b), {1, 1}, t2.constant(a), {1, 1, 1}, 1.7).scalar();
  CHECK(l1 == l2);
}

TEST_CASE("info sum loss gradient matches finite differences") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dist(0.1, 1.9);
  Matrix src(5, 1), tgt(4, 1);
  for (int i = 0; i < 5; ++i) src(i, 0) = dist(rng);
  for (int i = 0; i < 4; ++i) tgt(i, 0) = dist(rng);
  const std::vector<double> ks = {1, 1, 1, 1, 0}, kt = {1, 1, 1, 0};
  const double zeta = 2.3;

  auto value = [&](const Matrix& s, const Matrix& g) {
    Tape t;
    return info_sum_loss(t.constant(s), ks, t.constant(g), kt, zeta).scalar();
  };

  Tape t;
  Tensor s = t.leaf(src), g = t.leaf(tgt);
  t.backward(info_sum_loss(s, ks, g, kt, zeta));

  const double h = 1e-6;
  for (int i = 0; i < 5; ++i) {
    Matrix up = src, dn = src;
    up(i, 0) += h;
    dn(i, 0) -= h;
    const double fd = (value(up, tgt) - value(dn, tgt)) / (2 * h);
    CHECK(s.grad()(i, 0) == doctest::Approx(fd).epsilon(1e-5));
  }
  for (int i = 0; i < 4; ++i) {
    Matrix up = tgt, dn = tgt;
    up(i, 0) += h;
    dn(i, 0) -= h;
    const double fd = (value(src, up) - value(src, dn)) / (2 * h);
    CHECK(g.grad()(i, 0) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("info sum loss validates inputs") {
  Tape t;
  Tensor is = t.constant(Matrix::Ones(2, 1));
  Tensor it = t.constant(Matrix::Ones(2, 1));
  CHECK_THROWS_AS(info_sum_loss(is, {1, 1}, it, {1, 1}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(info_sum_loss(is, {1}, it, {1, 1}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(info_sum_loss(is, {0, 0}, it, {1, 1}, 1.0), std::invalid_argument);
}

TEST_CASE("total loss combines terms linearly") {
  Tape t;
  Tensor ce = t.constant(Matrix::Constant(1, 1, 1.0));
  Tensor sum = t.constant(Matrix::Constant(1, 1, 2.0));
  CHECK(total_loss(ce, sum, 0.3).scalar() == doctest::Approx(1.6));
  // lambda = 0 must reproduce the cross-entropy bit for bit.
  CHECK(total_loss(ce, sum, 0.0).scalar() == ce.scalar());
  CHECK_THROWS_AS(total_loss(ce, sum, -0.1), std::invalid_argument);
}

TEST_CASE("frequency table prices uniform counts at exactly calibrated 1") {
  std::vector<long long> counts(10, 50);
  const auto table = frequency_info_table(counts);
  REQUIRE(table.size() == 10);
  // All tokens identical, so the weighted mean equals every entry.
  for (double v : table) CHECK(v == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("frequency table gives rare tokens more info than common ones") {
  std::vector<long long> counts = {1000, 100, 10, 1};
  const auto table = frequency_info_table(counts);
  for (std::size_t i = 0; i + 1 < table.size(); ++i) CHECK(table[i] < table[i + 1]);
  for (double v : table) {
    CHECK(v > 0.0);
    CHECK(v < 2.0);
  }
}

TEST_CASE("frequency table calibrates the occurrence-weighted mean to 1") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<long long> dist(1, 500);
  std::vector<long long> counts(40);
  for (auto& c : counts) c = dist(rng);
  const auto table = frequency_info_table(counts);
  double weighted = 0, total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    weighted += double(counts[i]) * table[i];
    total += double(counts[i]);
  }
  CHECK(weighted / total == doctest::Approx(1.0).epsilon(0.011));
}

TEST_CASE("frequency table prices unseen tokens without disturbing calibration") {
  const auto tz = frequency_info_table({40, 0, 40});
  // The seen tokens alone pin the offset; they are uniform, so they sit at 1.
  // The unseen id is priced as a singleton and lands strictly above them.
  CHECK(tz[0] == doctest::Approx(1.0).epsilon(0.02));
  CHECK(tz[2] == doctest::Approx(1.0).epsilon(0.02));
  CHECK(tz[1] > tz[0]);
  CHECK(tz[1] < 2.0);
}

TEST_CASE("frequency table rejects bad input") {
  CHECK_THROWS_AS(frequency_info_table({}), std::invalid_argument);
  CHECK_THROWS_AS(frequency_info_table({0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(frequency_info_table({5, -1}), std::invalid_argument);
}

TEST_CASE("norm table is flat for equal-norm embeddings") {
  Matrix e = Matrix::Zero(6, 4);
  for (int i = 0; i < 6; ++i) e(i, i % 4) = 3.0;  // every row has norm 3
  const auto table = norm_info_table(e);
  for (double v : table) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("norm table scales with the row norm and clamps into (0, 2)") {
  Matrix e = Matrix::Zero(4, 3);
  e(0, 0) = 1.0;
  e(1, 0) = 2.0;
  e(2, 0) = 3.0;
  e(3, 0) = 100.0;  // forces mean up and its own ratio above 2
  const auto table = norm_info_table(e);
  CHECK(table[0] < table[1]);
  CHECK(table[1] < table[2]);
  for (double v : table) {
    CHECK(v > 0.0);
    CHECK(v < 2.0);
  }
  // mean norm = 26.5; ratios 1/26.5 and 2/26.5 survive unclamped
  CHECK(table[0] == doctest::Approx(1.0 / 26.5));
  CHECK(table[1] == doctest::Approx(2.0 / 26.5));
  CHECK(table[3] < 2.0);  // 100/26.5 clamped
}
