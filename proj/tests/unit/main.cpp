#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "mtf/alloc.hpp"

int main(int argc, char** argv) {
  mtf::tune_allocator();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
