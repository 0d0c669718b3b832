#include <doctest.h>

#include <vector>

#include "mazeadapt/error.hpp"
#include "mazeadapt/kernels.hpp"
#include "mazeadapt/rng.hpp"

using namespace mazeadapt;
namespace k = mazeadapt::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  fill_uniform(v, -2.0, 2.0, rng);
  return v;
}

}  // namespace

TEST_CASE("matmul identity") {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> eye{1, 0, 0, 1};
  std::vector<double> c(4, -1.0);
  k::matmul(a.data(), eye.data(), c.data(), 2, 2, 2);
  CHECK(c == a);
}

TEST_CASE("scalar kernels basics") {
  std::vector<double> x{-1.0, 0.0, 2.0};
  std::vector<double> out(3);
  k::scalar::relu(x.data(), out.data(), 3);
  CHECK(out == std::vector<double>{0.0, 0.0, 2.0});

  std::vector<double> y{1.0, 1.0, 1.0};
  k::scalar::axpy(0.5, x.data(), y.data(), 3);
  CHECK(y == std::vector<double>{0.5, 1.0, 2.0});
}

#if defined(MAZEADAPT_HAVE_AVX2)
TEST_CASE("avx2 variants are bit-identical to the scalar reference") {
  if (!k::avx2_available()) return;  // host without AVX2: nothing to compare
  Rng rng(2024);
  // Sizes straddle the 4-lane boundary, including tails.
  for (const auto [m, kk, n] : {std::tuple{1, 1, 1}, std::tuple{3, 5, 7}, std::tuple{8, 8, 8},
                                std::tuple{13, 17, 19}, std::tuple{100, 16, 100}}) {
    const auto a = random_vec(static_cast<std::size_t>(m * kk), rng);
    const auto b = random_vec(static_cast<std::size_t>(kk * n), rng);
    std::vector<double> cs(static_cast<std::size_t>(m * n)), cv(static_cast<std::size_t>(m * n));
    k::scalar::matmul(a.data(), b.data(), cs.data(), m, kk, n);
    k::avx2::matmul(a.data(), b.data(), cv.data(), m, kk, n);
    CHECK(cs == cv);
  }
  for (std::size_t n : {1u, 3u, 4u, 5u, 64u, 1001u}) {
    const auto a = random_vec(n, rng);
    const auto b = random_vec(n, rng);
    std::vector<double> s(n), v(n);

    k::scalar::add(a.data(), b.data(), s.data(), n);
    k::avx2::add(a.data(), b.data(), v.data(), n);
    CHECK(s == v);

    k::scalar::scale(a.data(), -1.7, s.data(), n);
    k::avx2::scale(a.data(), -1.7, v.data(), n);
    CHECK(s == v);

    k::scalar::relu(a.data(), s.data(), n);
    k::avx2::relu(a.data(), v.data(), n);
    CHECK(s == v);

    k::scalar::relu_backward(a.data(), b.data(), s.data(), n);
    k::avx2::relu_backward(a.data(), b.data(), v.data(), n);
    CHECK(s == v);

    std::vector<double> ys = b, yv = b;
    k::scalar::axpy(0.37, a.data(), ys.data(), n);
    k::avx2::axpy(0.37, a.data(), yv.data(), n);
    CHECK(ys == yv);
  }
}

TEST_CASE("backend can be forced and restored") {
  const k::Backend initial = k::active_backend();
  k::set_backend(k::Backend::Scalar);
  CHECK(k::active_backend() == k::Backend::Scalar);
  if (k::avx2_available()) {
    k::set_backend(k::Backend::Avx2);
    CHECK(k::active_backend() == k::Backend::Avx2);
  }
  k::set_backend(initial);
}
#else
TEST_CASE("avx2 backend rejected when not compiled in") {
  CHECK_FALSE(k::avx2_available());
  CHECK_THROWS_AS(k::set_backend(k::Backend::Avx2), ContractError);
}
#endif

TEST_CASE("transpose round trip") {
  Rng rng(7);
  const auto a = random_vec(3 * 5, rng);
  std::vector<double> t(15), back(15);
  k::transpose(a.data(), t.data(), 3, 5);
  k::transpose(t.data(), back.data(), 5, 3);
  CHECK(a == back);
}
