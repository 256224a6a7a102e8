#include <catch2/catch_amalgamated.hpp>

#include "gwnav/btd.hpp"
#include "oracles.hpp"

using namespace gwnav;

TEST_CASE("block identity system returns the right-hand side", "[btd]") {
  BtdMatrix m = BtdMatrix::zero(3);
  for (auto& d : m.diag) d = Mat6::Identity();
  Rng rng(7);
  VecX rhs = oracles::random_vector(m.dim(), rng);
  VecX x = btd_solve(m, rhs);
  REQUIRE((x - rhs).norm() == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("single-block system matches a direct 6x6 solve", "[btd]") {
  Rng rng(11);
  BtdMatrix m = oracles::random_spd_btd(1, rng);
  VecX rhs = oracles::random_vector(6, rng);
  VecX x = btd_solve(m, rhs);
  VecX ref = oracles::dense_lu_solve(m, rhs);
  REQUIRE((x - ref).norm() < 1e-12);
}

TEST_CASE("random SPD systems agree with dense LU", "[btd]") {
  Rng rng(1234);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 2 + static_cast<int>(rng.uniform_index(29));
    BtdMatrix m = oracles::random_spd_btd(n, rng);
    VecX rhs = oracles::random_vector(m.dim(), rng);
    VecX x = btd_solve(m, rhs);
    VecX ref = oracles::dense_lu_solve(m, rhs);
    INFO("trial " << trial << " blocks " << n);
    REQUIRE((x - ref).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("residual bound holds on ill-scaled but regular systems", "[btd]") {
  Rng rng(99);
  BtdMatrix m = oracles::random_spd_btd(12, rng);
  // widen the scale spread between blocks
  for (int i = 0; i < m.blocks(); ++i) {
    double s = std::pow(10.0, (i % 5) - 2);
    m.diag[i] *= s;
    if (i + 1 < m.blocks()) {
      m.upper[i] *= s;
      m.lower[i] *= s;
    }
  }
  VecX rhs = oracles::random_vector(m.dim(), rng);
  VecX x = btd_solve(m, rhs);
  REQUIRE((m.multiply(x) - rhs).norm() <= 1e-8 * rhs.norm());
}

TEST_CASE("zero right-hand side yields the zero solution", "[btd]") {
  Rng rng(5);
  BtdMatrix m = oracles::random_spd_btd(4, rng);
  VecX x = btd_solve(m, VecX::Zero(m.dim()));
  REQUIRE(x.norm() == 0.0);
}

TEST_CASE("singular pivot is reported with its block index", "[btd]") {
  Rng rng(21);
  BtdMatrix m = oracles::random_spd_btd(5, rng);
  m.diag[3].setZero();
  m.lower[2].setZero();
  m.upper[2].setZero(); // block 3 is exactly singular and decoupled
  try {
    btd_solve(m, VecX::Ones(m.dim()));
    FAIL("expected a numerical error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::numerical);
    REQUIRE(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("factorization solves many right-hand sides", "[btd]") {
  Rng rng(31);
  BtdMatrix m = oracles::random_spd_btd(10, rng);
  BtdFactorization f(m);
  for (int k = 0; k < 8; ++k) {
    VecX rhs = oracles::random_vector(m.dim(), rng);
    VecX x = f.solve(rhs);
    REQUIRE((m.multiply(x) - rhs).norm() <= 1e-8 * rhs.norm());
  }
}

TEST_CASE("multiply agrees with the dense product", "[btd]") {
  Rng rng(41);
  BtdMatrix m = oracles::random_spd_btd(7, rng);
  VecX x = oracles::random_vector(m.dim(), rng);
  VecX ref = oracles::to_dense(m) * x;
  REQUIRE((m.multiply(x) - ref).norm() < 1e-12 * ref.norm());
}
