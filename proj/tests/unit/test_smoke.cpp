#include <catch_amalgamated.hpp>

#include "oshp/oshp.hpp"

TEST_CASE("umbrella header compiles and basic types construct", "[smoke]") {
  oshp::Tensor t(oshp::Shape{2, 3, 4});
  REQUIRE(t.size() == 24);
  oshp::Rng rng(7);
  const double u = rng.u01();
  REQUIRE(u >= 0.0);
  REQUIRE(u < 1.0);
}
